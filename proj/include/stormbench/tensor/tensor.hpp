#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stormbench/util/errors.hpp"

namespace stormbench {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? ", " : "") << s[i];
    os << ']';
    return os.str();
}

template <class T>
class Tensor;
template <class T>
class Tape;

namespace detail {

inline std::size_t next_tensor_id() {
    static std::atomic<std::size_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

inline bool& grad_mode() {
    thread_local bool enabled = true;
    return enabled;
}

template <class T>
struct TensorImpl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    bool recorded = false;
    std::size_t id = next_tensor_id();

    bool tracked() const { return requires_grad || recorded; }
    bool has_grad() const { return grad_touched; }
    std::vector<T>& grad_buffer() {
        if (!grad_touched) {
            grad.assign(data.size(), T(0));
            grad_touched = true;
        }
        return grad;
    }
    void drop_grad() {
        std::vector<T>().swap(grad);
        grad_touched = false;
    }

private:
    bool grad_touched = false;
};

template <class T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

}  // namespace detail

/// Disables tape recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard() : prev_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

inline bool grad_enabled() { return detail::grad_mode(); }

/// Dense row-major tensor with optional reverse-mode gradient tracking.
///
/// Copies share storage; data is treated as immutable after creation apart from
/// parameter updates made through mutable_data() on leaves.
template <class T>
class Tensor {
public:
    using value_type = T;
    using Impl = detail::TensorImpl<T>;

    Tensor() = default;

    explicit Tensor(Shape shape, bool requires_grad = false) : impl_(std::make_shared<Impl>()) {
        impl_->data.assign(stormbench::numel(shape), T(0));
        impl_->shape = std::move(shape);
        impl_->requires_grad = requires_grad;
    }

    Tensor(Shape shape, std::vector<T> data, bool requires_grad = false) : impl_(std::make_shared<Impl>()) {
        if (stormbench::numel(shape) != data.size())
            throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape " +
                             to_string(shape));
        impl_->shape = std::move(shape);
        impl_->data = std::move(data);
        impl_->requires_grad = requires_grad;
    }

    static Tensor full(Shape shape, T value, bool requires_grad = false) {
        Tensor t(std::move(shape), requires_grad);
        std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
        return t;
    }

    static Tensor scalar(T value, bool requires_grad = false) { return Tensor(Shape{}, {value}, requires_grad); }

    bool defined() const { return static_cast<bool>(impl_); }
    const Shape& shape() const { return impl_->shape; }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t extent(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t numel() const { return impl_->data.size(); }
    std::size_t id() const { return impl_->id; }

    std::span<const T> data() const { return impl_->data; }
    std::span<T> mutable_data() { return impl_->data; }
    T at(std::size_t i) const { return impl_->data.at(i); }

    T item() const {
        if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool v) { impl_->requires_grad = v; }
    bool tracked() const { return impl_ && impl_->tracked(); }

    bool has_grad() const { return impl_->has_grad(); }
    std::span<const T> grad() const {
        if (!has_grad()) throw std::logic_error("tensor has no gradient");
        return impl_->grad;
    }
    std::span<T> mutable_grad() { return impl_->grad_buffer(); }
    void zero_grad() {
        if (impl_->has_grad()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
    }
    void clear_grad() { impl_->drop_grad(); }

    /// Copy of the values without gradient history.
    Tensor detach() const { return Tensor(shape(), impl_->data, false); }

    const std::shared_ptr<Impl>& impl() const { return impl_; }

    template <class U>
    Tensor<U> cast() const {
        std::vector<U> out(impl_->data.begin(), impl_->data.end());
        return Tensor<U>(shape(), std::move(out));
    }

private:
    std::shared_ptr<Impl> impl_;
};

/// Split real/imaginary storage of a complex tensor; both parts are ordinary
/// tensors so gradients flow through them independently.
template <class T>
struct ComplexTensor {
    Tensor<T> re;
    Tensor<T> im;

    ComplexTensor() = default;
    ComplexTensor(Tensor<T> r, Tensor<T> i) : re(std::move(r)), im(std::move(i)) {
        if (re.shape() != im.shape())
            throw ShapeError("complex parts differ: " + to_string(re.shape()) + " vs " + to_string(im.shape()));
    }

    static ComplexTensor zeros(const Shape& shape, bool requires_grad = false) {
        return ComplexTensor(Tensor<T>(shape, requires_grad), Tensor<T>(shape, requires_grad));
    }

    const Shape& shape() const { return re.shape(); }
    std::size_t numel() const { return re.numel(); }
    bool tracked() const { return re.tracked() || im.tracked(); }
};

/// Ordered record of primitive applications on one thread.
///
/// Nodes are appended in execution order, so inputs of node i are always
/// produced before i. backward() replays the nodes once in reverse and then
/// consumes the tape.
template <class T>
class Tape {
public:
    using ImplPtr = detail::ImplPtr<T>;

    struct Node {
        const char* op;
        std::vector<std::size_t> inputs;
        std::vector<ImplPtr> outputs;
        std::function<void()> backward;
    };

    static Tape& current() {
        thread_local Tape tape;
        return tape;
    }

    void record(const char* op, const std::vector<ImplPtr>& inputs, std::vector<ImplPtr> outputs,
                std::function<void()> backward) {
        Node node{op, {}, std::move(outputs), std::move(backward)};
        node.inputs.reserve(inputs.size());
        for (const auto& in : inputs) node.inputs.push_back(in->id);
        for (auto& out : node.outputs) {
            out->recorded = true;
            live_bytes_ += out->data.size() * sizeof(T);
        }
        peak_bytes_ = std::max(peak_bytes_, live_bytes_);
        nodes_.push_back(std::move(node));
    }

    void backward(const Tensor<T>& loss) {
        if (!loss.defined() || !loss.tracked())
            throw std::logic_error("backward() on a tensor that is not part of a gradient graph");
        if (loss.numel() != 1)
            throw ShapeError("backward() needs a scalar loss, got shape " + to_string(loss.shape()));
        loss.impl()->grad_buffer()[0] += T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            bool reached = std::any_of(it->outputs.begin(), it->outputs.end(),
                                       [](const ImplPtr& o) { return o->has_grad(); });
            if (reached && it->backward) it->backward();
            it->backward = nullptr;
            for (auto& o : it->outputs) {
                if (!o->requires_grad && o.get() != loss.impl().get()) o->drop_grad();
            }
        }
        clear();
    }

    void clear() {
        for (auto& n : nodes_)
            for (auto& o : n.outputs) o->recorded = false;
        nodes_.clear();
        live_bytes_ = 0;
    }

    std::size_t size() const { return nodes_.size(); }
    const std::vector<Node>& nodes() const { return nodes_; }
    std::size_t live_bytes() const { return live_bytes_; }
    std::size_t peak_bytes() const { return peak_bytes_; }
    void reset_peak() { peak_bytes_ = live_bytes_; }

private:
    std::vector<Node> nodes_;
    std::size_t live_bytes_ = 0;
    std::size_t peak_bytes_ = 0;
};

template <class T>
void backward(const Tensor<T>& loss) {
    Tape<T>::current().backward(loss);
}

namespace detail {

template <class T>
bool needs_record(std::initializer_list<const Tensor<T>*> inputs) {
    if (!grad_mode()) return false;
    for (const auto* t : inputs)
        if (t && t->defined() && t->tracked()) return true;
    return false;
}

template <class T>
void record(const char* op, std::vector<ImplPtr<T>> inputs, std::vector<ImplPtr<T>> outputs,
            std::function<void()> backward) {
    Tape<T>::current().record(op, inputs, std::move(outputs), std::move(backward));
}

template <class T>
void require_shape(const Tensor<T>& t, const Shape& expected, const char* op, const char* what) {
    if (t.shape() != expected)
        throw ShapeError(std::string(op) + ": " + what + " has shape " + to_string(t.shape()) + ", expected " +
                         to_string(expected));
}

template <class T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op, const char* what) {
    if (t.rank() != rank)
        throw ShapeError(std::string(op) + ": " + what + " must be rank " + std::to_string(rank) + ", got shape " +
                         to_string(t.shape()));
}

}  // namespace detail

}  // namespace stormbench
