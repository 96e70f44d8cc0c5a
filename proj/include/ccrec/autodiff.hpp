#pragma once

// Dense numerical kernel for the recommendation network: masked parameter
// tensors, a small reverse-mode tape over vector values, a GRU cell, dense
// and softmax/cross-entropy layers, Adagrad, and a central-difference
// gradient oracle. Scope is exactly the ops the network needs.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ccrec/rng.hpp"

namespace ccrec
{
    struct DimensionError : std::runtime_error
    {
        using std::runtime_error::runtime_error;
    };

    // Parameter tensor with gradient and a binary mask. Mask 0 means the
    // entry is permanently inactive: it contributes 0 to every forward pass,
    // receives gradient 0, and is skipped by optimizer updates.
    struct ParamTensor
    {
        std::string name;
        std::vector<std::size_t> shape;
        std::vector<double> values;
        std::vector<double> grad;
        std::vector<std::uint8_t> mask;
        bool prunable = true;

        ParamTensor() = default;
        ParamTensor(std::string name, std::vector<std::size_t> shape, bool prunable = true);

        std::size_t size() const { return values.size(); }
        std::size_t rows() const;
        std::size_t cols() const;

        // Masked read: what every forward pass sees.
        double at(std::size_t i) const { return values[i] * static_cast<double>(mask[i]); }

        void zero_grad();
        void apply_mask();
        std::size_t active_count() const;
        double sparsity() const; // masked fraction; 0 for empty tensors
    };

    // Uniform [-r, r] with r = sqrt(6 / (fan_in + fan_out)) for matrices;
    // rank-1 tensors (biases) are zero-initialized.
    void init_uniform(ParamTensor& p, Rng& rng);

    // Reverse-mode tape over vector-valued nodes. Parameters participate via
    // ParamTensor*; backward() accumulates into ParamTensor::grad (masked
    // entries receive exactly 0). The tape is single-use per forward pass.
    class Tape
    {
    public:
        using NodeId = std::int32_t;

        Tape() = default;
        Tape(const Tape&) = delete;
        Tape& operator=(const Tape&) = delete;

        NodeId constant(std::vector<double> v);
        NodeId embedding_row(ParamTensor& table, std::size_t row);
        NodeId matvec(ParamTensor& w, NodeId x);
        NodeId affine(ParamTensor& w, ParamTensor& b, NodeId x);
        // Scores restricted to the given rows of (w, b): out[i] = w[rows[i]]·x + b[rows[i]].
        NodeId row_scores(ParamTensor& w, ParamTensor& b, NodeId x, std::vector<std::int32_t> rows);
        NodeId add(NodeId a, NodeId b);
        NodeId hadamard(NodeId a, NodeId b);
        NodeId one_minus(NodeId a);
        NodeId sigmoid(NodeId a);
        NodeId tanh_fn(NodeId a);
        // Lasso truncation: zero where |x_i| <= gamma, pass-through otherwise.
        // Backward is straight-through on survivors, 0 on truncated entries.
        NodeId truncate_below(NodeId a, double gamma);
        NodeId l1_norm(NodeId a);                            // scalar
        NodeId cross_entropy(NodeId scores, std::size_t target); // scalar; caches probabilities
        NodeId param_sum(ParamTensor& p);                    // scalar: sum of masked values
        NodeId add_scaled(NodeId a, NodeId b, double coef);  // scalar: a + coef * b
        NodeId scale(NodeId a, double c);

        std::size_t size() const { return m_nodes.size(); }
        const std::vector<double>& value(NodeId id) const;
        double scalar(NodeId id) const;
        // Softmax probabilities cached by a cross_entropy node.
        const std::vector<double>& probabilities(NodeId ce_node) const;

        // Reverse pass from a scalar root. Throws if the tape is empty, the
        // root is invalid, or the root is not a scalar.
        void backward(NodeId root);
        void clear();

    private:
        enum class Op : std::uint8_t
        {
            Constant,
            EmbeddingRow,
            MatVec,
            Affine,
            RowScores,
            Add,
            Hadamard,
            OneMinus,
            Sigmoid,
            Tanh,
            TruncateBelow,
            L1Norm,
            CrossEntropy,
            ParamSum,
            AddScaled,
            Scale,
        };

        struct Node
        {
            Op op;
            NodeId a = -1;
            NodeId b = -1;
            ParamTensor* p = nullptr;
            ParamTensor* p2 = nullptr;
            std::size_t index = 0; // embedding row / CE target
            double coef = 0;
            std::vector<std::int32_t> rows;
            std::vector<double> val;
            std::vector<double> grad;
            std::vector<double> aux; // CE probabilities
        };

        NodeId push(Node node);
        Node& at(NodeId id);
        const Node& at(NodeId id) const;
        void backward_node(Node& n);

        std::vector<Node> m_nodes;
    };

    // GRU cell parameters; the reset gate is applied to the hidden state
    // before the candidate projection, and the update gate z keeps the
    // previous state: h' = z h + (1 - z) tanh(Wc x + Uc (r h) + bc).
    struct GruCellParams
    {
        std::size_t input_dim = 0;
        std::size_t hidden_dim = 0;
        ParamTensor w_update, u_update, b_update;
        ParamTensor w_reset, u_reset, b_reset;
        ParamTensor w_cand, u_cand, b_cand;

        GruCellParams() = default;
        GruCellParams(std::size_t input_dim, std::size_t hidden_dim, const std::string& prefix);

        void init(Rng& rng);
        std::vector<ParamTensor*> params();
        std::vector<const ParamTensor*> params() const;

        Tape::NodeId step(Tape& tape, Tape::NodeId x, Tape::NodeId h_prev);
    };

    // Plain (tape-free) single step; bit-identical to Tape-based stepping.
    std::vector<double> gru_step(const GruCellParams& cell,
                                 std::span<const double> x,
                                 std::span<const double> h_prev);

    // Full recurrence from h0; one hidden state per input.
    std::vector<std::vector<double>> gru_forward(const GruCellParams& cell,
                                                 std::span<const std::vector<double>> inputs,
                                                 const std::vector<double>& h0);

    // Affine map w·x + b with masked weights contributing 0.
    std::vector<double> dense_forward(const ParamTensor& w, const ParamTensor& b,
                                      std::span<const double> x);

    // Numerically stabilized; returns (loss, probabilities).
    std::pair<double, std::vector<double>> softmax_cross_entropy(std::span<const double> scores,
                                                                 std::size_t target);

    std::vector<double> softmax(std::span<const double> scores);

    struct Adagrad
    {
        double learning_rate = 0.01;
        double epsilon = 1e-8;
        std::vector<std::vector<double>> accum;

        void reset(std::span<ParamTensor* const> params);
        // accum += grad^2; value -= lr * grad / (sqrt(accum) + eps).
        // Masked entries are untouched, including their accumulators.
        void step(std::span<ParamTensor* const> params);
    };

    // Central differences (f(x+eps) - f(x-eps)) / (2 eps) per coordinate,
    // compared against the gradients already stored in each ParamTensor.
    // Returns max over coordinates of |a - n| / max(|a|, |n|, 1e-8).
    // `skip` may exclude coordinates (e.g. near a truncation kink).
    double finite_diff_check(const std::function<double()>& loss_fn,
                             std::span<ParamTensor* const> params, double eps,
                             const std::function<bool(const ParamTensor&, std::size_t)>& skip = {});
}
