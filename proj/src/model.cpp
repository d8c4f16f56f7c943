#include "subadj/model.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "subadj/ops.hpp"

namespace subadj {

void ModelConfig::finalize() {
    if (d_ff == 0) d_ff = 4 * d_model;
    span.win_size = win_size;
    validate();
}

void ModelConfig::validate() const {
    if (d_model < 1 || n_layers < 1 || n_heads < 1 || win_size < 1 || n_channels < 1) {
        throw ConfigError("model: all sizes must be >= 1");
    }
    if (d_model % n_heads != 0) {
        throw ConfigError("model: d_model " + std::to_string(d_model) +
                          " not divisible by n_heads " + std::to_string(n_heads));
    }
    if (dropout < 0.0 || dropout >= 1.0) {
        throw ConfigError("model: dropout must be in [0, 1)");
    }
    if (span.win_size != win_size) {
        throw ConfigError("model: span.win_size " + std::to_string(span.win_size) +
                          " does not match win_size " + std::to_string(win_size));
    }
    span.validate();
    mapping.validate();
}

namespace {

Tensor xavier(Rng& rng, int fan_in, int fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Tensor w = Tensor::zeros({fan_in, fan_out}, true);
    for (auto& v : w.values()) v = rng.uniform(-limit, limit);
    return w;
}

Tensor sinusoidal_table(int win_size, int d_model) {
    Tensor pe = Tensor::zeros({win_size, d_model});
    for (int pos = 0; pos < win_size; ++pos) {
        for (int i = 0; i < d_model; i += 2) {
            const double angle = pos / std::pow(10000.0, static_cast<double>(i) / d_model);
            pe.at(pos, i) = std::sin(angle);
            if (i + 1 < d_model) pe.at(pos, i + 1) = std::cos(angle);
        }
    }
    return pe;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ModelParams p;
    p.input_w = xavier(rng, cfg.n_channels, cfg.d_model);
    p.input_b = Tensor::zeros({cfg.d_model}, true);
    p.positional = sinusoidal_table(cfg.win_size, cfg.d_model);
    for (int l = 0; l < cfg.n_layers; ++l) {
        LayerParams lp;
        lp.wq = xavier(rng, cfg.d_model, cfg.d_model);
        lp.bq = Tensor::zeros({cfg.d_model}, true);
        lp.wk = xavier(rng, cfg.d_model, cfg.d_model);
        lp.bk = Tensor::zeros({cfg.d_model}, true);
        lp.wv = xavier(rng, cfg.d_model, cfg.d_model);
        lp.bv = Tensor::zeros({cfg.d_model}, true);
        lp.wo = xavier(rng, cfg.d_model, cfg.d_model);
        lp.bo = Tensor::zeros({cfg.d_model}, true);
        lp.ln1_gamma = Tensor::full({cfg.d_model}, 1.0, true);
        lp.ln1_beta = Tensor::zeros({cfg.d_model}, true);
        lp.ln2_gamma = Tensor::full({cfg.d_model}, 1.0, true);
        lp.ln2_beta = Tensor::zeros({cfg.d_model}, true);
        lp.ffn_w1 = xavier(rng, cfg.d_model, cfg.ffn_dim());
        lp.ffn_b1 = Tensor::zeros({cfg.ffn_dim()}, true);
        lp.ffn_w2 = xavier(rng, cfg.ffn_dim(), cfg.d_model);
        lp.ffn_b2 = Tensor::zeros({cfg.d_model}, true);
        for (int h = 0; h < cfg.n_heads; ++h) {
            lp.tau.push_back(Tensor::scalar(cfg.mapping.tau_init, true));
        }
        p.layers.push_back(std::move(lp));
    }
    p.final_gamma = Tensor::full({cfg.d_model}, 1.0, true);
    p.final_beta = Tensor::zeros({cfg.d_model}, true);
    p.output_w = xavier(rng, cfg.d_model, cfg.n_channels);
    p.output_b = Tensor::zeros({cfg.n_channels}, true);
    return p;
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    out.emplace_back("input.w", input_w);
    out.emplace_back("input.b", input_b);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& lp = layers[l];
        const std::string base = "layer" + std::to_string(l) + ".";
        out.emplace_back(base + "wq", lp.wq);
        out.emplace_back(base + "bq", lp.bq);
        out.emplace_back(base + "wk", lp.wk);
        out.emplace_back(base + "bk", lp.bk);
        out.emplace_back(base + "wv", lp.wv);
        out.emplace_back(base + "bv", lp.bv);
        out.emplace_back(base + "wo", lp.wo);
        out.emplace_back(base + "bo", lp.bo);
        out.emplace_back(base + "ln1_gamma", lp.ln1_gamma);
        out.emplace_back(base + "ln1_beta", lp.ln1_beta);
        out.emplace_back(base + "ln2_gamma", lp.ln2_gamma);
        out.emplace_back(base + "ln2_beta", lp.ln2_beta);
        out.emplace_back(base + "ffn_w1", lp.ffn_w1);
        out.emplace_back(base + "ffn_b1", lp.ffn_b1);
        out.emplace_back(base + "ffn_w2", lp.ffn_w2);
        out.emplace_back(base + "ffn_b2", lp.ffn_b2);
        for (std::size_t h = 0; h < lp.tau.size(); ++h) {
            out.emplace_back(base + "tau" + std::to_string(h), lp.tau[h]);
        }
    }
    out.emplace_back("final.gamma", final_gamma);
    out.emplace_back("final.beta", final_beta);
    out.emplace_back("output.w", output_w);
    out.emplace_back("output.b", output_b);
    return out;
}

std::vector<Tensor> ModelParams::all() const {
    std::vector<Tensor> out;
    for (auto& [name, t] : named()) out.push_back(t);
    return out;
}

void ModelParams::floor_tau(double floor_value) {
    for (auto& lp : layers) {
        for (auto& t : lp.tau) {
            if (t.at(0) < floor_value) t.at(0) = floor_value;
        }
    }
}

ModelParams ModelParams::clone() const {
    auto copy_tensor = [](const Tensor& t) {
        return Tensor::from_data(t.shape(), t.values(), t.requires_grad());
    };
    ModelParams c;
    c.input_w = copy_tensor(input_w);
    c.input_b = copy_tensor(input_b);
    c.positional = copy_tensor(positional);
    for (const auto& lp : layers) {
        LayerParams n;
        n.wq = copy_tensor(lp.wq);
        n.bq = copy_tensor(lp.bq);
        n.wk = copy_tensor(lp.wk);
        n.bk = copy_tensor(lp.bk);
        n.wv = copy_tensor(lp.wv);
        n.bv = copy_tensor(lp.bv);
        n.wo = copy_tensor(lp.wo);
        n.bo = copy_tensor(lp.bo);
        n.ln1_gamma = copy_tensor(lp.ln1_gamma);
        n.ln1_beta = copy_tensor(lp.ln1_beta);
        n.ln2_gamma = copy_tensor(lp.ln2_gamma);
        n.ln2_beta = copy_tensor(lp.ln2_beta);
        n.ffn_w1 = copy_tensor(lp.ffn_w1);
        n.ffn_b1 = copy_tensor(lp.ffn_b1);
        n.ffn_w2 = copy_tensor(lp.ffn_w2);
        n.ffn_b2 = copy_tensor(lp.ffn_b2);
        for (const auto& t : lp.tau) n.tau.push_back(copy_tensor(t));
        c.layers.push_back(std::move(n));
    }
    c.final_gamma = copy_tensor(final_gamma);
    c.final_beta = copy_tensor(final_beta);
    c.output_w = copy_tensor(output_w);
    c.output_b = copy_tensor(output_b);
    return c;
}

ForwardResult forward(const Tensor& x, const ModelParams& params, const ModelConfig& cfg,
                      Rng* dropout_rng) {
    cfg.validate();
    if (x.rank() != 2 || x.dim(0) != cfg.win_size || x.dim(1) != cfg.n_channels) {
        throw DimensionError("forward: input " + shape_str(x.shape()) + " does not match window " +
                             std::to_string(cfg.win_size) + " x " + std::to_string(cfg.n_channels));
    }
    const int dh = cfg.head_dim();
    const bool use_dropout = dropout_rng != nullptr && cfg.dropout > 0.0;

    Tensor h = add(add_rowvec(matmul(x, params.input_w), params.input_b), params.positional);

    std::vector<Tensor> attn_mats;
    std::vector<Tensor> sacon_vecs;
    attn_mats.reserve(static_cast<std::size_t>(cfg.n_layers * cfg.n_heads));
    sacon_vecs.reserve(static_cast<std::size_t>(cfg.n_layers * cfg.n_heads));

    for (int l = 0; l < cfg.n_layers; ++l) {
        const auto& lp = params.layers[static_cast<std::size_t>(l)];

        Tensor n1 = layer_norm(h, lp.ln1_gamma, lp.ln1_beta);
        Tensor q = add_rowvec(matmul(n1, lp.wq), lp.bq);
        Tensor k = add_rowvec(matmul(n1, lp.wk), lp.bk);
        Tensor v = add_rowvec(matmul(n1, lp.wv), lp.bv);

        std::vector<Tensor> head_outs;
        head_outs.reserve(static_cast<std::size_t>(cfg.n_heads));
        for (int head = 0; head < cfg.n_heads; ++head) {
            Tensor qh = slice_cols(q, head * dh, dh);
            Tensor kh = slice_cols(k, head * dh, dh);
            Tensor vh = slice_cols(v, head * dh, dh);
            auto att = linear_attention(qh, kh, vh, cfg.mapping, lp.tau[static_cast<std::size_t>(head)]);
            head_outs.push_back(att.out);
            attn_mats.push_back(att.a);
            sacon_vecs.push_back(sacon(att.a, cfg.span));
        }
        Tensor merged = concat_cols(head_outs);
        Tensor attn_out = add_rowvec(matmul(merged, lp.wo), lp.bo);
        if (use_dropout) attn_out = dropout(attn_out, cfg.dropout, *dropout_rng);
        h = add(h, attn_out);

        Tensor n2 = layer_norm(h, lp.ln2_gamma, lp.ln2_beta);
        Tensor f = relu(add_rowvec(matmul(n2, lp.ffn_w1), lp.ffn_b1));
        f = add_rowvec(matmul(f, lp.ffn_w2), lp.ffn_b2);
        if (use_dropout) f = dropout(f, cfg.dropout, *dropout_rng);
        h = add(h, f);
    }

    Tensor hn = layer_norm(h, params.final_gamma, params.final_beta);
    ForwardResult res;
    res.x_hat = add_rowvec(matmul(hn, params.output_w), params.output_b);
    res.state = AttentionStateBuilder::build(cfg.win_size, cfg.n_layers, cfg.n_heads,
                                             std::move(attn_mats), std::move(sacon_vecs));
    return res;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const ModelConfig& cfg) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out << "subadj-checkpoint v1\n";
    out << "config d_model " << cfg.d_model << "\n";
    out << "config n_layers " << cfg.n_layers << "\n";
    out << "config n_heads " << cfg.n_heads << "\n";
    out << "config d_ff " << cfg.d_ff << "\n";
    out << "config win_size " << cfg.win_size << "\n";
    out << "config n_channels " << cfg.n_channels << "\n";
    out << "config k1 " << cfg.span.k1 << "\n";
    out << "config k2 " << cfg.span.k2 << "\n";
    out << "config mapping " << to_string(cfg.mapping.kind) << "\n";
    out << "config clamp_value " << format_double(cfg.mapping.clamp_value) << "\n";
    out << "config tau_init " << format_double(cfg.mapping.tau_init) << "\n";
    out << "config power_exponent " << format_double(cfg.mapping.power_exponent) << "\n";
    out << "config renormalize " << (cfg.mapping.renormalize ? 1 : 0) << "\n";
    out << "config dropout " << format_double(cfg.dropout) << "\n";
    for (const auto& [name, t] : params.named()) {
        out << "tensor " << name << " " << t.rank();
        for (int i = 0; i < t.rank(); ++i) out << " " << t.dim(i);
        out << "\n";
        const auto& vals = t.values();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            if (i) out << " ";
            out << format_double(vals[i]);
        }
        out << "\n";
    }
    out << "end\n";
    if (!out) throw IoError("failed writing checkpoint: " + path);
}

std::pair<ModelParams, ModelConfig> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "subadj-checkpoint v1") {
        throw InputError("unrecognized checkpoint header in " + path);
    }
    ModelConfig cfg;
    cfg.d_ff = 0;
    std::vector<std::pair<std::string, Tensor>> tensors;
    while (std::getline(in, line)) {
        if (line == "end") break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "config") {
            std::string key, value;
            ls >> key >> value;
            if (key == "d_model") cfg.d_model = std::stoi(value);
            else if (key == "n_layers") cfg.n_layers = std::stoi(value);
            else if (key == "n_heads") cfg.n_heads = std::stoi(value);
            else if (key == "d_ff") cfg.d_ff = std::stoi(value);
            else if (key == "win_size") cfg.win_size = std::stoi(value);
            else if (key == "n_channels") cfg.n_channels = std::stoi(value);
            else if (key == "k1") cfg.span.k1 = std::stoi(value);
            else if (key == "k2") cfg.span.k2 = std::stoi(value);
            else if (key == "mapping") cfg.mapping.kind = mapping_kind_from_string(value);
            else if (key == "clamp_value") cfg.mapping.clamp_value = std::stod(value);
            else if (key == "tau_init") cfg.mapping.tau_init = std::stod(value);
            else if (key == "power_exponent") cfg.mapping.power_exponent = std::stod(value);
            else if (key == "renormalize") cfg.mapping.renormalize = value != "0";
            else if (key == "dropout") cfg.dropout = std::stod(value);
            else throw InputError("unknown checkpoint config key \"" + key + "\" in " + path);
        } else if (tag == "tensor") {
            std::string name;
            int rank = 0;
            ls >> name >> rank;
            std::vector<int> shape;
            std::size_t n = 1;
            for (int i = 0; i < rank; ++i) {
                int d = 0;
                ls >> d;
                shape.push_back(d);
                n *= static_cast<std::size_t>(d);
            }
            if (!ls || rank < 1) throw InputError("malformed tensor header in " + path);
            if (!std::getline(in, line)) throw InputError("missing tensor data in " + path);
            std::istringstream ds(line);
            std::vector<double> vals(n);
            for (std::size_t i = 0; i < n; ++i) {
                if (!(ds >> vals[i])) {
                    throw InputError("tensor " + name + " in " + path + ": expected " +
                                     std::to_string(n) + " values");
                }
            }
            tensors.emplace_back(name, Tensor::from_data(shape, std::move(vals), true));
        } else if (!tag.empty()) {
            throw InputError("unrecognized checkpoint line in " + path + ": " + line);
        }
    }
    cfg.finalize();
    ModelParams params = init_params(cfg, 0);
    auto slots = params.named();
    if (slots.size() != tensors.size()) {
        throw InputError("checkpoint " + path + " holds " + std::to_string(tensors.size()) +
                         " tensors, model expects " + std::to_string(slots.size()));
    }
    for (std::size_t i = 0; i < slots.size(); ++i) {
        auto& [expect_name, slot] = slots[i];
        auto& [name, loaded] = tensors[i];
        if (name != expect_name || loaded.shape() != slot.shape()) {
            throw InputError("checkpoint tensor " + name + " " + shape_str(loaded.shape()) +
                             " does not match expected " + expect_name + " " +
                             shape_str(slot.shape()));
        }
        slot.values() = loaded.values();
    }
    return {std::move(params), cfg};
}

}  // namespace subadj
