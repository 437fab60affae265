#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ucodec {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

// 32-bit mode rounds every op output (and optimizer-updated parameters) to the
// nearest float, emulating single-precision training while storage stays
// double. 64-bit mode is used for gradient verification.
enum class Precision { F32, F64 };

Precision current_precision();

class PrecisionScope {
public:
    explicit PrecisionScope(Precision p);
    ~PrecisionScope();
    PrecisionScope(const PrecisionScope&) = delete;
    PrecisionScope& operator=(const PrecisionScope&) = delete;

private:
    Precision previous_;
};

struct TensorImpl {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first touched by backward
    bool requires_grad = false;
    Precision precision = Precision::F64;
    std::string name;

    std::span<double> ensure_grad();
};

// Shared handle to a dense row-major array. Copies alias; use clone() for a
// deep copy.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, double v);
    static Tensor from(Shape shape, std::vector<double> values);
    static Tensor scalar(double v);
    // Trainable leaf: requires_grad set, name attached.
    static Tensor parameter(Shape shape, std::vector<double> values, std::string name);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    int dim(std::size_t axis) const { return impl_->shape.at(axis); }
    std::size_t rank() const { return impl_->shape.size(); }
    std::size_t numel() const { return impl_->value.size(); }

    std::span<const double> data() const { return impl_->value; }
    std::span<double> mutable_data() { return impl_->value; }
    std::vector<double> to_vector() const { return impl_->value; }
    double item() const;
    double operator[](std::size_t i) const { return impl_->value[i]; }

    std::span<const double> grad() const { return impl_->grad; }
    std::span<double> mutable_grad() { return impl_->ensure_grad(); }
    bool has_grad() const { return !impl_->grad.empty(); }
    void zero_grad();

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool on) { impl_->requires_grad = on; }
    Precision precision() const { return impl_->precision; }
    const std::string& name() const { return impl_->name; }

    Tensor clone() const;
    // Same values, cut from the graph.
    Tensor detach() const;

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

private:
    std::shared_ptr<TensorImpl> impl_;
};

// Ordered record of executed differentiable ops. Ops append an entry while a
// TapeScope is active and at least one input requires a gradient; backward()
// replays the entries in exact reverse order.
class Tape {
public:
    using BackwardFn = std::function<void()>;

    void record(std::string_view op, BackwardFn fn);
    std::size_t size() const { return entries_.size(); }
    std::vector<std::string_view> op_names() const;
    void clear() { entries_.clear(); }

    // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
    // reachable tensor that requires them. Throws Usage for non-scalar loss.
    void backward(const Tensor& loss);

private:
    struct Entry {
        std::string_view op;
        BackwardFn fn;
    };
    std::vector<Entry> entries_;
};

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

// Suspends recording (inference paths, oracle evaluation).
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    Tape* previous_;
};

void backward(const Tensor& loss, Tape& tape);

namespace detail {

// Creates an op output, applying the current precision's rounding.
Tensor make_output(Shape shape, std::vector<double> values);

// True when an op over these inputs must be taped.
bool needs_tape(std::initializer_list<const Tensor*> inputs);

void round_to_precision(std::span<double> values, Precision p);

}  // namespace detail

}  // namespace ucodec
