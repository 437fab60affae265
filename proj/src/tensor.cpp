#include "ucodec/tensor.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "ucodec/error.hpp"

namespace ucodec {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        require(d > 0, ErrorKind::Configuration, "non-positive dimension in shape " + shape_string(shape));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        os << (i ? "," : "") << shape[i];
    }
    os << ']';
    return os.str();
}

namespace {
thread_local Precision g_precision = Precision::F64;
thread_local Tape* g_tape = nullptr;
}  // namespace

Precision current_precision() { return g_precision; }

PrecisionScope::PrecisionScope(Precision p) : previous_(g_precision) { g_precision = p; }
PrecisionScope::~PrecisionScope() { g_precision = previous_; }

std::span<double> TensorImpl::ensure_grad() {
    if (grad.size() != value.size()) {
        grad.assign(value.size(), 0.0);
    }
    return grad;
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
    const std::size_t n = shape_numel(shape);
    return from(std::move(shape), std::vector<double>(n, v));
}

Tensor Tensor::from(Shape shape, std::vector<double> values) {
    require(shape_numel(shape) == values.size(), ErrorKind::Configuration,
            "shape " + shape_string(shape) + " does not match " + std::to_string(values.size()) + " values");
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->value = std::move(values);
    impl->precision = g_precision;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

Tensor Tensor::parameter(Shape shape, std::vector<double> values, std::string name) {
    Tensor t = from(std::move(shape), std::move(values));
    t.impl_->requires_grad = true;
    t.impl_->name = std::move(name);
    return t;
}

double Tensor::item() const {
    require(numel() == 1, ErrorKind::Usage, "item() on tensor of shape " + shape_string(shape()));
    return impl_->value[0];
}

void Tensor::zero_grad() {
    if (!impl_->grad.empty()) {
        std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
    }
}

Tensor Tensor::clone() const {
    auto impl = std::make_shared<TensorImpl>(*impl_);
    impl->grad.clear();
    return Tensor(std::move(impl));
}

Tensor Tensor::detach() const {
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = impl_->shape;
    impl->value = impl_->value;
    impl->precision = impl_->precision;
    return Tensor(std::move(impl));
}

void Tape::record(std::string_view op, BackwardFn fn) { entries_.push_back({op, std::move(fn)}); }

std::vector<std::string_view> Tape::op_names() const {
    std::vector<std::string_view> names;
    names.reserve(entries_.size());
    for (const auto& e : entries_) {
        names.push_back(e.op);
    }
    return names;
}

void Tape::backward(const Tensor& loss) {
    require(loss.defined() && loss.numel() == 1, ErrorKind::Usage,
            "backward requires a scalar loss, got shape " + (loss.defined() ? shape_string(loss.shape()) : "<undefined>"));
    loss.impl()->ensure_grad()[0] += 1.0;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        it->fn();
    }
}

Tape* active_tape() { return g_tape; }

TapeScope::TapeScope(Tape& tape) : previous_(g_tape) { g_tape = &tape; }
TapeScope::~TapeScope() { g_tape = previous_; }

NoGradScope::NoGradScope() : previous_(g_tape) { g_tape = nullptr; }
NoGradScope::~NoGradScope() { g_tape = previous_; }

void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

namespace detail {

void round_to_precision(std::span<double> values, Precision p) {
    if (p == Precision::F32) {
        for (double& v : values) {
            v = static_cast<double>(static_cast<float>(v));
        }
    }
}

Tensor make_output(Shape shape, std::vector<double> values) {
    round_to_precision(values, g_precision);
    return Tensor::from(std::move(shape), std::move(values));
}

bool needs_tape(std::initializer_list<const Tensor*> inputs) {
    if (g_tape == nullptr) {
        return false;
    }
    return std::any_of(inputs.begin(), inputs.end(),
                       [](const Tensor* t) { return t != nullptr && t->defined() && t->requires_grad(); });
}

}  // namespace detail

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Configuration: return "configuration";
        case ErrorKind::InputTooShort: return "input-too-short";
        case ErrorKind::NumericDegeneracy: return "numeric-degeneracy";
        case ErrorKind::Index: return "index";
        case ErrorKind::Usage: return "usage";
        case ErrorKind::Alignment: return "alignment";
        case ErrorKind::Format: return "format";
        case ErrorKind::CorruptStream: return "corrupt-stream";
        case ErrorKind::SequenceLength: return "sequence-length";
        case ErrorKind::TrainingDivergence: return "training-divergence";
        case ErrorKind::Dataset: return "dataset";
        case ErrorKind::Compatibility: return "compatibility";
        case ErrorKind::UndefinedMetric: return "undefined-metric";
        case ErrorKind::Io: return "io";
    }
    return "unknown";
}

}  // namespace ucodec
