// SPDX-License-Identifier: Apache-2.0
//
// Dense float32 tensor with an explicit reverse-mode tape.

#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace drnet {

/// Shape or extent mismatch between operands.
class DimensionError : public std::invalid_argument {
   public:
    using std::invalid_argument::invalid_argument;
};

/// Caller violated a documented precondition (non-scalar loss, non-one-hot prior, ...).
class ContractError : public std::logic_error {
   public:
    using std::logic_error::logic_error;
};

/// Malformed file, checkpoint or config.
class FormatError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

/// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

using Shape = std::vector<int64_t>;

std::string shape_str(const Shape& shape);
int64_t shape_numel(const Shape& shape);

/// Reference-counted handle to a dense row-major float32 array.
///
/// Copies share storage. Use clone() for a deep copy. Gradient buffers are
/// allocated lazily the first time an adjoint is accumulated.
class Tensor {
   public:
    Tensor() = default;
    explicit Tensor(Shape shape, bool requires_grad = false);
    Tensor(Shape shape, std::vector<float> data, bool requires_grad = false);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, float value);
    static Tensor of(Shape shape, std::initializer_list<float> values);

    bool defined() const { return node_ != nullptr; }
    bool same(const Tensor& other) const { return node_ == other.node_; }

    const Shape& shape() const;
    int64_t rank() const { return static_cast<int64_t>(shape().size()); }
    /// Extent of axis i; negative i counts from the back.
    int64_t dim(int64_t i) const;
    int64_t numel() const;

    std::span<const float> data() const;
    std::span<float> mutable_data();
    float item() const;
    float at(std::initializer_list<int64_t> index) const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);

    bool has_grad() const;
    std::span<const float> grad() const;
    /// Gradient buffer, zero-filled on first access. Accumulation is allowed
    /// through any handle, including const ones.
    std::span<float> grad_buffer() const;
    void zero_grad() const;

    Tensor clone() const;
    /// Deep copy without gradient tracking.
    Tensor detach() const;

   private:
    struct Node {
        Shape shape;
        std::vector<float> data;
        std::vector<float> grad;
        bool requires_grad = false;
    };
    std::shared_ptr<Node> node_;
};

/// Ordered record of differentiable ops executed while the tape is active.
class Tape {
   public:
    using Adjoint = std::function<void(std::span<const float> grad_out)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(const Tensor& output, Adjoint adjoint);

    /// Seeds d loss / d loss = 1 and replays adjoints in reverse order.
    void backward(const Tensor& loss);
    void reset();

    size_t size() const { return entries_.size(); }
    bool consumed() const { return consumed_; }

   private:
    struct Entry {
        Tensor output;
        Adjoint adjoint;
    };
    std::vector<Entry> entries_;
    bool consumed_ = false;
};

/// Makes `tape` the recording target for ops on this thread while alive.
class TapeScope {
   public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

   private:
    Tape* previous_;
};

/// Active tape if any input needs a gradient, else nullptr.
Tape* recording_tape(std::initializer_list<const Tensor*> inputs);
Tape* recording_tape(std::span<const Tensor> inputs);

void backward(const Tensor& loss, Tape& tape);

/// Per-thread counters of executed forward ops and multiply-accumulates.
struct OpStats {
    int64_t ops = 0;
    int64_t macs = 0;
};

class OpCounter {
   public:
    OpCounter();
    ~OpCounter();
    OpCounter(const OpCounter&) = delete;
    OpCounter& operator=(const OpCounter&) = delete;
    OpStats stats() const { return stats_; }

   private:
    friend void count_op(int64_t macs);
    OpStats stats_;
    OpCounter* previous_;
};

void count_op(int64_t macs);

}  // namespace drnet
