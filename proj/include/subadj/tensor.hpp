#pragma once

#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "subadj/errors.hpp"

namespace subadj {

// Allocation counters reported by the CLI per run. Tracked for every
// tensor data/grad buffer.
struct AllocStats {
    static std::atomic<std::size_t> current_bytes;
    static std::atomic<std::size_t> peak_bytes;
    static std::atomic<std::size_t> total_allocations;
    static void reset();
};

using Buffer = std::shared_ptr<std::vector<double>>;

Buffer alloc_buffer(std::size_t n, double fill = 0.0);

std::string shape_str(const std::vector<int>& shape);

// Dense row-major tensor of 64-bit floats, rank 1 to 3. Tensor is a cheap
// handle over shared storage: copies alias the same data and grad, which
// is what lets tape closures see gradients allocated after capture.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
    static Tensor full(std::vector<int> shape, double value, bool requires_grad = false);
    static Tensor from_data(std::vector<int> shape, std::vector<double> values,
                            bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return static_cast<bool>(impl_); }
    const std::vector<int>& shape() const { return impl_->shape; }
    int rank() const { return static_cast<int>(impl_->shape.size()); }
    int dim(int i) const { return impl_->shape[static_cast<std::size_t>(i)]; }
    std::size_t numel() const;

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) const { impl_->requires_grad = v; }

    // The handle is const-independent of the shared storage: a const
    // Tensor (e.g. captured in a tape closure) can still fill gradients.
    std::vector<double>& values() const { return *impl_->data; }
    bool has_grad() const { return static_cast<bool>(impl_->grad); }
    std::vector<double>& grad() const { return *impl_->grad; }

    double& at(int i) const { return (*impl_->data)[static_cast<std::size_t>(i)]; }
    double& at(int i, int j) const { return (*impl_->data)[flat(i, j)]; }
    double& at(int i, int j, int k) const { return (*impl_->data)[flat(i, j, k)]; }

    double item() const;

    void ensure_grad() const;  // allocates a zero grad buffer if absent
    void zero_grad() const;
    bool all_finite() const;

    // Identity of the underlying storage, used by the tape to locate the
    // loss entry and by tests asserting aliasing.
    const void* id() const { return impl_.get(); }

    std::size_t flat(int i, int j) const {
        return static_cast<std::size_t>(i) * static_cast<std::size_t>(impl_->shape.back()) +
               static_cast<std::size_t>(j);
    }
    std::size_t flat(int i, int j, int k) const {
        const auto d1 = static_cast<std::size_t>(impl_->shape[1]);
        const auto d2 = static_cast<std::size_t>(impl_->shape[2]);
        return (static_cast<std::size_t>(i) * d1 + static_cast<std::size_t>(j)) * d2 +
               static_cast<std::size_t>(k);
    }

private:
    struct Impl {
        std::vector<int> shape;
        Buffer data;
        Buffer grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Impl> impl_;
};

// Reverse-mode tape. Operations append an entry while a tape is active;
// backward() replays the entries in reverse recording order, which is a
// valid reverse topological order by construction.
class Tape {
public:
    void record(const Tensor& out, std::function<void()> backward_fn);

    // Seeds d(loss)/d(loss)=1 and propagates to every recorded operand.
    // Leaf gradients accumulate across calls; intermediate gradients are
    // reset at the start of each call.
    void backward(const Tensor& loss);

    std::size_t size() const { return entries_.size(); }
    void clear() { entries_.clear(); }

private:
    struct Entry {
        Tensor out;
        std::function<void()> backward_fn;
    };
    std::vector<Entry> entries_;
};

// Thread-local active tape. Operations record only while one is active,
// so inference runs tape-free.
Tape* active_tape();

class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

}  // namespace subadj
