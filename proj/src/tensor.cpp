// SPDX-License-Identifier: Apache-2.0

#include "drnet/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace drnet {

namespace {

thread_local Tape* g_active_tape = nullptr;
thread_local OpCounter* g_counter = nullptr;

}  // namespace

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(Shape shape, bool requires_grad) : node_(std::make_shared<Node>()) {
    for (int64_t d : shape) {
        if (d <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }
    node_->data.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
    node_->shape = std::move(shape);
    node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<float> data, bool requires_grad)
    : node_(std::make_shared<Node>()) {
    for (int64_t d : shape) {
        if (d <= 0) throw DimensionError("tensor extents must be positive, got " + shape_str(shape));
    }
    if (static_cast<int64_t>(data.size()) != shape_numel(shape)) {
        throw DimensionError("data length " + std::to_string(data.size()) + " does not match shape " +
                             shape_str(shape));
    }
    node_->shape = std::move(shape);
    node_->data = std::move(data);
    node_->requires_grad = requires_grad;
}

Tensor Tensor::full(Shape shape, float value) {
    Tensor t(std::move(shape));
    std::fill(t.node_->data.begin(), t.node_->data.end(), value);
    return t;
}

Tensor Tensor::of(Shape shape, std::initializer_list<float> values) {
    return Tensor(std::move(shape), std::vector<float>(values));
}

const Shape& Tensor::shape() const {
    if (!node_) throw ContractError("use of undefined tensor");
    return node_->shape;
}

int64_t Tensor::dim(int64_t i) const {
    const auto& s = shape();
    const auto r = static_cast<int64_t>(s.size());
    if (i < 0) i += r;
    if (i < 0 || i >= r) throw DimensionError("axis out of range for shape " + shape_str(s));
    return s[static_cast<size_t>(i)];
}

int64_t Tensor::numel() const { return static_cast<int64_t>(node_ ? node_->data.size() : 0); }

std::span<const float> Tensor::data() const {
    if (!node_) throw ContractError("use of undefined tensor");
    return node_->data;
}

std::span<float> Tensor::mutable_data() {
    if (!node_) throw ContractError("use of undefined tensor");
    return node_->data;
}

float Tensor::item() const {
    if (numel() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
    return node_->data[0];
}

float Tensor::at(std::initializer_list<int64_t> index) const {
    const auto& s = shape();
    if (index.size() != s.size()) throw DimensionError("index rank mismatch for " + shape_str(s));
    int64_t flat = 0;
    size_t axis = 0;
    for (int64_t i : index) {
        if (i < 0 || i >= s[axis]) throw DimensionError("index out of range for " + shape_str(s));
        flat = flat * s[axis] + i;
        ++axis;
    }
    return node_->data[static_cast<size_t>(flat)];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
    if (!node_) throw ContractError("use of undefined tensor");
    node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const float> Tensor::grad() const {
    if (!node_) throw ContractError("use of undefined tensor");
    return node_->grad;
}

std::span<float> Tensor::grad_buffer() const {
    if (!node_) throw ContractError("use of undefined tensor");
    if (node_->grad.empty()) node_->grad.assign(node_->data.size(), 0.0f);
    return node_->grad;
}

void Tensor::zero_grad() const {
    if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0f);
}

Tensor Tensor::clone() const {
    Tensor t(shape(), node_->data, node_->requires_grad);
    return t;
}

Tensor Tensor::detach() const { return Tensor(shape(), node_->data, false); }

void Tape::record(const Tensor& output, Adjoint adjoint) {
    if (consumed_) throw ContractError("tape already replayed; reset() before recording again");
    Tensor out = output;
    out.set_requires_grad(true);
    entries_.push_back({std::move(out), std::move(adjoint)});
}

void Tape::backward(const Tensor& loss) {
    if (consumed_) throw ContractError("backward called twice on the same tape without reset()");
    if (!loss.defined() || loss.numel() != 1) {
        throw ContractError("backward requires a single-element loss, got " +
                            (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
    }
    consumed_ = true;
    Tensor seed = loss;
    seed.grad_buffer()[0] += 1.0f;
    for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
        if (!it->output.has_grad()) continue;
        it->adjoint(it->output.grad());
    }
}

void Tape::reset() {
    entries_.clear();
    consumed_ = false;
}

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* recording_tape(std::initializer_list<const Tensor*> inputs) {
    if (!g_active_tape) return nullptr;
    for (const Tensor* t : inputs) {
        if (t && t->requires_grad()) return g_active_tape;
    }
    return nullptr;
}

Tape* recording_tape(std::span<const Tensor> inputs) {
    if (!g_active_tape) return nullptr;
    for (const Tensor& t : inputs) {
        if (t.requires_grad()) return g_active_tape;
    }
    return nullptr;
}

void backward(const Tensor& loss, Tape& tape) { tape.backward(loss); }

OpCounter::OpCounter() : previous_(g_counter) { g_counter = this; }
OpCounter::~OpCounter() { g_counter = previous_; }

void count_op(int64_t macs) {
    for (OpCounter* c = g_counter; c; c = c->previous_) {
        c->stats_.ops += 1;
        c->stats_.macs += macs;
    }
}

}  // namespace drnet
