#include "subadj/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace subadj {

std::atomic<std::size_t> AllocStats::current_bytes{0};
std::atomic<std::size_t> AllocStats::peak_bytes{0};
std::atomic<std::size_t> AllocStats::total_allocations{0};

void AllocStats::reset() {
    current_bytes = 0;
    peak_bytes = 0;
    total_allocations = 0;
}

Buffer alloc_buffer(std::size_t n, double fill) {
    const std::size_t bytes = n * sizeof(double);
    AllocStats::total_allocations.fetch_add(1, std::memory_order_relaxed);
    const std::size_t now =
        AllocStats::current_bytes.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    std::size_t peak = AllocStats::peak_bytes.load(std::memory_order_relaxed);
    while (now > peak && !AllocStats::peak_bytes.compare_exchange_weak(peak, now)) {
    }
    auto* raw = new std::vector<double>(n, fill);
    return Buffer(raw, [bytes](std::vector<double>* p) {
        AllocStats::current_bytes.fetch_sub(bytes, std::memory_order_relaxed);
        delete p;
    });
}

static std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    for (int d : shape) {
        if (d < 1) throw DimensionError("tensor dimension must be >= 1, got shape " + shape_str(shape));
    }
    if (shape.empty() || shape.size() > 3) {
        throw DimensionError("tensor rank must be 1..3, got shape " + shape_str(shape));
    }
    Tensor t;
    t.impl_ = std::make_shared<Impl>();
    t.impl_->shape = std::move(shape);
    t.impl_->data = alloc_buffer(shape_numel(t.impl_->shape));
    t.impl_->requires_grad = requires_grad;
    return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    std::fill(t.values().begin(), t.values().end(), value);
    return t;
}

Tensor Tensor::from_data(std::vector<int> shape, std::vector<double> values, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    if (values.size() != t.numel()) {
        throw DimensionError("data length " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(t.shape()));
    }
    std::copy(values.begin(), values.end(), t.values().begin());
    return t;
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_data({1}, {value}, requires_grad);
}

std::size_t Tensor::numel() const { return shape_numel(impl_->shape); }

double Tensor::item() const {
    if (numel() != 1) {
        throw ContractError("item() requires a scalar tensor, got shape " + shape_str(shape()));
    }
    return (*impl_->data)[0];
}

void Tensor::ensure_grad() const {
    if (!impl_->grad) impl_->grad = alloc_buffer(numel());
}

void Tensor::zero_grad() const {
    if (impl_->grad) std::fill(impl_->grad->begin(), impl_->grad->end(), 0.0);
}

bool Tensor::all_finite() const {
    for (double v : *impl_->data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tape::record(const Tensor& out, std::function<void()> backward_fn) {
    entries_.push_back({out, std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
    if (loss.numel() != 1) {
        throw ContractError("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    std::ptrdiff_t loss_index = -1;
    for (std::size_t i = entries_.size(); i > 0; --i) {
        if (entries_[i - 1].out.id() == loss.id()) {
            loss_index = static_cast<std::ptrdiff_t>(i - 1);
            break;
        }
    }
    if (loss_index < 0) {
        throw ContractError("backward: loss was not produced by a computation recorded on this tape");
    }
    // Intermediate grads are scoped to one backward pass; leaf grads are
    // owned by their tensors and accumulate.
    for (auto& e : entries_) e.out.zero_grad();
    Tensor loss_out = entries_[static_cast<std::size_t>(loss_index)].out;
    loss_out.ensure_grad();
    loss_out.grad()[0] = 1.0;
    for (std::ptrdiff_t i = loss_index; i >= 0; --i) {
        auto& e = entries_[static_cast<std::size_t>(i)];
        if (e.out.has_grad()) e.backward_fn();
    }
}

namespace {
thread_local Tape* t_active_tape = nullptr;
}

Tape* active_tape() { return t_active_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(t_active_tape) { t_active_tape = &tape; }

TapeScope::~TapeScope() { t_active_tape = previous_; }

}  // namespace subadj
