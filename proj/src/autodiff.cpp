#include "ccrec/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ccrec
{
    namespace
    {
        std::size_t element_count(const std::vector<std::size_t>& shape)
        {
            std::size_t n = 1;
            for (std::size_t d : shape)
            {
                n *= d;
            }
            return shape.empty() ? 0 : n;
        }
    }

    ParamTensor::ParamTensor(std::string name_, std::vector<std::size_t> shape_, bool prunable_)
        : name(std::move(name_)), shape(std::move(shape_)), prunable(prunable_)
    {
        const std::size_t n = element_count(shape);
        values.assign(n, 0.0);
        grad.assign(n, 0.0);
        mask.assign(n, 1);
    }

    std::size_t ParamTensor::rows() const
    {
        if (shape.size() != 2)
        {
            throw DimensionError("ParamTensor::rows: tensor '" + name + "' is not rank 2");
        }
        return shape[0];
    }

    std::size_t ParamTensor::cols() const
    {
        if (shape.size() != 2)
        {
            throw DimensionError("ParamTensor::cols: tensor '" + name + "' is not rank 2");
        }
        return shape[1];
    }

    void ParamTensor::zero_grad()
    {
        std::fill(grad.begin(), grad.end(), 0.0);
    }

    void ParamTensor::apply_mask()
    {
        for (std::size_t i = 0; i < values.size(); ++i)
        {
            if (mask[i] == 0)
            {
                values[i] = 0.0;
            }
        }
    }

    std::size_t ParamTensor::active_count() const
    {
        std::size_t n = 0;
        for (std::uint8_t m : mask)
        {
            n += m;
        }
        return n;
    }

    double ParamTensor::sparsity() const
    {
        if (values.empty())
        {
            return 0.0;
        }
        return 1.0 - static_cast<double>(active_count()) / static_cast<double>(values.size());
    }

    void init_uniform(ParamTensor& p, Rng& rng)
    {
        if (p.shape.size() < 2)
        {
            return; // biases start at zero
        }
        const double fan_in = static_cast<double>(p.cols());
        const double fan_out = static_cast<double>(p.rows());
        const double r = std::sqrt(6.0 / (fan_in + fan_out));
        for (double& v : p.values)
        {
            v = rng.uniform(-r, r);
        }
    }

    // ---- Tape ----

    Tape::NodeId Tape::push(Node node)
    {
        m_nodes.push_back(std::move(node));
        return static_cast<NodeId>(m_nodes.size() - 1);
    }

    Tape::Node& Tape::at(NodeId id)
    {
        if (id < 0 || static_cast<std::size_t>(id) >= m_nodes.size())
        {
            throw std::out_of_range("Tape: invalid node id");
        }
        return m_nodes[static_cast<std::size_t>(id)];
    }

    const Tape::Node& Tape::at(NodeId id) const
    {
        if (id < 0 || static_cast<std::size_t>(id) >= m_nodes.size())
        {
            throw std::out_of_range("Tape: invalid node id");
        }
        return m_nodes[static_cast<std::size_t>(id)];
    }

    Tape::NodeId Tape::constant(std::vector<double> v)
    {
        Node n;
        n.op = Op::Constant;
        n.val = std::move(v);
        return push(std::move(n));
    }

    Tape::NodeId Tape::embedding_row(ParamTensor& table, std::size_t row)
    {
        const std::size_t dim = table.cols();
        if (row >= table.rows())
        {
            throw std::out_of_range("embedding_row: row " + std::to_string(row) + " out of range");
        }
        Node n;
        n.op = Op::EmbeddingRow;
        n.p = &table;
        n.index = row;
        n.val.resize(dim);
        const std::size_t base = row * dim;
        for (std::size_t j = 0; j < dim; ++j)
        {
            n.val[j] = table.at(base + j);
        }
        return push(std::move(n));
    }

    Tape::NodeId Tape::matvec(ParamTensor& w, NodeId x)
    {
        const auto& xs = at(x).val;
        if (w.cols() != xs.size())
        {
            throw DimensionError("matvec: '" + w.name + "' has " + std::to_string(w.cols()) +
                                 " columns, input has " + std::to_string(xs.size()));
        }
        Node n;
        n.op = Op::MatVec;
        n.p = &w;
        n.a = x;
        const std::size_t out = w.rows();
        const std::size_t in = w.cols();
        n.val.assign(out, 0.0);
        for (std::size_t i = 0; i < out; ++i)
        {
            const std::size_t base = i * in;
            double acc = 0;
            for (std::size_t j = 0; j < in; ++j)
            {
                acc += w.at(base + j) * xs[j];
            }
            n.val[i] = acc;
        }
        return push(std::move(n));
    }

    Tape::NodeId Tape::affine(ParamTensor& w, ParamTensor& b, NodeId x)
    {
        if (b.size() != w.rows())
        {
            throw DimensionError("affine: bias '" + b.name + "' does not match '" + w.name + "'");
        }
        const auto& xs = at(x).val;
        if (w.cols() != xs.size())
        {
            throw DimensionError("affine: '" + w.name + "' has " + std::to_string(w.cols()) +
                                 " columns, input has " + std::to_string(xs.size()));
        }
        Node n;
        n.op = Op::Affine;
        n.p = &w;
        n.p2 = &b;
        n.a = x;
        const std::size_t out = w.rows();
        const std::size_t in = w.cols();
        n.val.assign(out, 0.0);
        for (std::size_t i = 0; i < out; ++i)
        {
            const std::size_t base = i * in;
            double acc = b.at(i);
            for (std::size_t j = 0; j < in; ++j)
            {
                acc += w.at(base + j) * xs[j];
            }
            n.val[i] = acc;
        }
        return push(std::move(n));
    }

    Tape::NodeId Tape::row_scores(ParamTensor& w, ParamTensor& b, NodeId x,
                                  std::vector<std::int32_t> rows)
    {
        const auto& xs = at(x).val;
        if (w.cols() != xs.size())
        {
            throw DimensionError("row_scores: input dimension mismatch");
        }
        Node n;
        n.op = Op::RowScores;
        n.p = &w;
        n.p2 = &b;
        n.a = x;
        n.rows = std::move(rows);
        const std::size_t in = w.cols();
        n.val.assign(n.rows.size(), 0.0);
        for (std::size_t i = 0; i < n.rows.size(); ++i)
        {
            const auto r = static_cast<std::size_t>(n.rows[i]);
            if (n.rows[i] < 0 || r >= w.rows())
            {
                throw std::out_of_range("row_scores: row " + std::to_string(n.rows[i]) +
                                        " out of range");
            }
            const std::size_t base = r * in;
            double acc = b.at(r);
            for (std::size_t j = 0; j < in; ++j)
            {
                acc += w.at(base + j) * xs[j];
            }
            n.val[i] = acc;
        }
        return push(std::move(n));
    }

    Tape::NodeId Tape::add(NodeId a, NodeId b)
    {
        const auto& av = at(a).val;
        const auto& bv = at(b).val;
        if (av.size() != bv.size())
        {
            throw DimensionError("add: size mismatch");
        }
        Node n;
        n.op = Op::Add;
        n.a = a;
        n.b = b;
        n.val.resize(av.size());
        for (std::size_t i = 0; i < av.size(); ++i)
        {
            n.val[i] = av[i] + bv[i];
        }
        return push(std::move(n));
    }

    Tape::NodeId Tape::hadamard(NodeId a, NodeId b)
    {
        const auto& av = at(a).val;
        const auto& bv = at(b).val;
        if (av.size() != bv.size())
        {
            throw DimensionError("hadamard: size mismatch");
        }
        Node n;
        n.op = Op::Hadamard;
        n.a = a;
        n.b = b;
        n.val.resize(av.size());
        for (std::size_t i = 0; i < av.size(); ++i)
        {
            n.val[i] = av[i] * bv[i];
        }
        return push(std::move(n));
    }

    Tape::NodeId Tape::one_minus(NodeId a)
    {
        const auto& av = at(a).val;
        Node n;
        n.op = Op::OneMinus;
        n.a = a;
        n.val.resize(av.size());
        for (std::size_t i = 0; i < av.size(); ++i)
        {
            n.val[i] = 1.0 - av[i];
        }
        return push(std::move(n));
    }

    Tape::NodeId Tape::sigmoid(NodeId a)
    {
        const auto& av = at(a).val;
        Node n;
        n.op = Op::Sigmoid;
        n.a = a;
        n.val.resize(av.size());
        for (std::size_t i = 0; i < av.size(); ++i)
        {
            n.val[i] = 1.0 / (1.0 + std::exp(-av[i]));
        }
        return push(std::move(n));
    }

    Tape::NodeId Tape::tanh_fn(NodeId a)
    {
        const auto& av = at(a).val;
        Node n;
        n.op = Op::Tanh;
        n.a = a;
        n.val.resize(av.size());
        for (std::size_t i = 0; i < av.size(); ++i)
        {
            n.val[i] = std::tanh(av[i]);
        }
        return push(std::move(n));
    }

    Tape::NodeId Tape::truncate_below(NodeId a, double gamma)
    {
        const auto& av = at(a).val;
        Node n;
        n.op = Op::TruncateBelow;
        n.a = a;
        n.coef = gamma;
        n.val.resize(av.size());
        for (std::size_t i = 0; i < av.size(); ++i)
        {
            n.val[i] = (std::abs(av[i]) > gamma) ? av[i] : 0.0;
        }
        return push(std::move(n));
    }

    Tape::NodeId Tape::l1_norm(NodeId a)
    {
        const auto& av = at(a).val;
        double acc = 0;
        for (double v : av)
        {
            acc += std::abs(v);
        }
        Node n;
        n.op = Op::L1Norm;
        n.a = a;
        n.val = {acc};
        return push(std::move(n));
    }

    Tape::NodeId Tape::cross_entropy(NodeId scores, std::size_t target)
    {
        const auto& sv = at(scores).val;
        if (target >= sv.size())
        {
            throw std::out_of_range("cross_entropy: target " + std::to_string(target) +
                                    " out of range for " + std::to_string(sv.size()) + " scores");
        }
        const double m = *std::max_element(sv.begin(), sv.end());
        double z = 0;
        for (double s : sv)
        {
            z += std::exp(s - m);
        }
        Node n;
        n.op = Op::CrossEntropy;
        n.a = scores;
        n.index = target;
        n.aux.resize(sv.size());
        for (std::size_t i = 0; i < sv.size(); ++i)
        {
            n.aux[i] = std::exp(sv[i] - m) / z;
        }
        n.val = {std::log(z) + m - sv[target]};
        return push(std::move(n));
    }

    Tape::NodeId Tape::param_sum(ParamTensor& p)
    {
        double acc = 0;
        for (std::size_t i = 0; i < p.size(); ++i)
        {
            acc += p.at(i);
        }
        Node n;
        n.op = Op::ParamSum;
        n.p = &p;
        n.val = {acc};
        return push(std::move(n));
    }

    Tape::NodeId Tape::add_scaled(NodeId a, NodeId b, double coef)
    {
        const double av = scalar(a);
        const double bv = scalar(b);
        Node n;
        n.op = Op::AddScaled;
        n.a = a;
        n.b = b;
        n.coef = coef;
        n.val = {av + coef * bv};
        return push(std::move(n));
    }

    Tape::NodeId Tape::scale(NodeId a, double c)
    {
        const auto& av = at(a).val;
        Node n;
        n.op = Op::Scale;
        n.a = a;
        n.coef = c;
        n.val.resize(av.size());
        for (std::size_t i = 0; i < av.size(); ++i)
        {
            n.val[i] = c * av[i];
        }
        return push(std::move(n));
    }

    const std::vector<double>& Tape::value(NodeId id) const
    {
        return at(id).val;
    }

    double Tape::scalar(NodeId id) const
    {
        const auto& v = at(id).val;
        if (v.size() != 1)
        {
            throw DimensionError("Tape::scalar: node is not scalar");
        }
        return v[0];
    }

    const std::vector<double>& Tape::probabilities(NodeId ce_node) const
    {
        const Node& n = at(ce_node);
        if (n.op != Op::CrossEntropy)
        {
            throw std::invalid_argument("Tape::probabilities: not a cross-entropy node");
        }
        return n.aux;
    }

    void Tape::backward(NodeId root)
    {
        if (m_nodes.empty())
        {
            throw std::logic_error("Tape::backward called before any forward pass");
        }
        Node& r = at(root);
        if (r.val.size() != 1)
        {
            throw DimensionError("Tape::backward: root must be scalar");
        }
        for (Node& n : m_nodes)
        {
            n.grad.assign(n.val.size(), 0.0);
        }
        r.grad[0] = 1.0;
        for (std::size_t i = m_nodes.size(); i-- > 0;)
        {
            backward_node(m_nodes[i]);
        }
    }

    void Tape::backward_node(Node& n)
    {
        switch (n.op)
        {
        case Op::Constant:
            break;
        case Op::EmbeddingRow:
        {
            const std::size_t dim = n.p->cols();
            const std::size_t base = n.index * dim;
            for (std::size_t j = 0; j < dim; ++j)
            {
                n.p->grad[base + j] += static_cast<double>(n.p->mask[base + j]) * n.grad[j];
            }
            break;
        }
        case Op::MatVec:
        case Op::Affine:
        {
            auto& x = at(n.a);
            const std::size_t out = n.p->rows();
            const std::size_t in = n.p->cols();
            for (std::size_t i = 0; i < out; ++i)
            {
                const double g = n.grad[i];
                if (g == 0.0)
                {
                    continue;
                }
                const std::size_t base = i * in;
                for (std::size_t j = 0; j < in; ++j)
                {
                    const double m = static_cast<double>(n.p->mask[base + j]);
                    n.p->grad[base + j] += m * g * x.val[j];
                    x.grad[j] += m * n.p->values[base + j] * g;
                }
                if (n.op == Op::Affine)
                {
                    n.p2->grad[i] += static_cast<double>(n.p2->mask[i]) * g;
                }
            }
            break;
        }
        case Op::RowScores:
        {
            auto& x = at(n.a);
            const std::size_t in = n.p->cols();
            for (std::size_t i = 0; i < n.rows.size(); ++i)
            {
                const double g = n.grad[i];
                if (g == 0.0)
                {
                    continue;
                }
                const std::size_t base = static_cast<std::size_t>(n.rows[i]) * in;
                for (std::size_t j = 0; j < in; ++j)
                {
                    const double m = static_cast<double>(n.p->mask[base + j]);
                    n.p->grad[base + j] += m * g * x.val[j];
                    x.grad[j] += m * n.p->values[base + j] * g;
                }
                const auto r = static_cast<std::size_t>(n.rows[i]);
                n.p2->grad[r] += static_cast<double>(n.p2->mask[r]) * g;
            }
            break;
        }
        case Op::Add:
        {
            auto& a = at(n.a);
            auto& b = at(n.b);
            for (std::size_t i = 0; i < n.grad.size(); ++i)
            {
                a.grad[i] += n.grad[i];
                b.grad[i] += n.grad[i];
            }
            break;
        }
        case Op::Hadamard:
        {
            auto& a = at(n.a);
            auto& b = at(n.b);
            for (std::size_t i = 0; i < n.grad.size(); ++i)
            {
                a.grad[i] += n.grad[i] * b.val[i];
                b.grad[i] += n.grad[i] * a.val[i];
            }
            break;
        }
        case Op::OneMinus:
        {
            auto& a = at(n.a);
            for (std::size_t i = 0; i < n.grad.size(); ++i)
            {
                a.grad[i] -= n.grad[i];
            }
            break;
        }
        case Op::Sigmoid:
        {
            auto& a = at(n.a);
            for (std::size_t i = 0; i < n.grad.size(); ++i)
            {
                a.grad[i] += n.grad[i] * n.val[i] * (1.0 - n.val[i]);
            }
            break;
        }
        case Op::Tanh:
        {
            auto& a = at(n.a);
            for (std::size_t i = 0; i < n.grad.size(); ++i)
            {
                a.grad[i] += n.grad[i] * (1.0 - n.val[i] * n.val[i]);
            }
            break;
        }
        case Op::TruncateBelow:
        {
            auto& a = at(n.a);
            for (std::size_t i = 0; i < n.grad.size(); ++i)
            {
                if (std::abs(a.val[i]) > n.coef)
                {
                    a.grad[i] += n.grad[i];
                }
            }
            break;
        }
        case Op::L1Norm:
        {
            auto& a = at(n.a);
            const double g = n.grad[0];
            for (std::size_t i = 0; i < a.val.size(); ++i)
            {
                if (a.val[i] > 0)
                {
                    a.grad[i] += g;
                }
                else if (a.val[i] < 0)
                {
                    a.grad[i] -= g;
                }
                // subgradient at 0 taken as 0
            }
            break;
        }
        case Op::CrossEntropy:
        {
            auto& s = at(n.a);
            const double g = n.grad[0];
            for (std::size_t i = 0; i < s.val.size(); ++i)
            {
                const double indicator = (i == n.index) ? 1.0 : 0.0;
                s.grad[i] += g * (n.aux[i] - indicator);
            }
            break;
        }
        case Op::ParamSum:
        {
            const double g = n.grad[0];
            for (std::size_t i = 0; i < n.p->size(); ++i)
            {
                n.p->grad[i] += static_cast<double>(n.p->mask[i]) * g;
            }
            break;
        }
        case Op::AddScaled:
        {
            at(n.a).grad[0] += n.grad[0];
            at(n.b).grad[0] += n.coef * n.grad[0];
            break;
        }
        case Op::Scale:
        {
            auto& a = at(n.a);
            for (std::size_t i = 0; i < n.grad.size(); ++i)
            {
                a.grad[i] += n.coef * n.grad[i];
            }
            break;
        }
        }
    }

    void Tape::clear()
    {
        m_nodes.clear();
    }

    // ---- GRU cell ----

    GruCellParams::GruCellParams(std::size_t input_dim_, std::size_t hidden_dim_,
                                 const std::string& prefix)
        : input_dim(input_dim_),
          hidden_dim(hidden_dim_),
          w_update(prefix + ".w_update", {hidden_dim_, input_dim_}),
          u_update(prefix + ".u_update", {hidden_dim_, hidden_dim_}),
          b_update(prefix + ".b_update", {hidden_dim_}, false),
          w_reset(prefix + ".w_reset", {hidden_dim_, input_dim_}),
          u_reset(prefix + ".u_reset", {hidden_dim_, hidden_dim_}),
          b_reset(prefix + ".b_reset", {hidden_dim_}, false),
          w_cand(prefix + ".w_cand", {hidden_dim_, input_dim_}),
          u_cand(prefix + ".u_cand", {hidden_dim_, hidden_dim_}),
          b_cand(prefix + ".b_cand", {hidden_dim_}, false)
    {
    }

    void GruCellParams::init(Rng& rng)
    {
        for (ParamTensor* p : params())
        {
            init_uniform(*p, rng);
        }
    }

    std::vector<ParamTensor*> GruCellParams::params()
    {
        return {&w_update, &u_update, &b_update, &w_reset, &u_reset, &b_reset,
                &w_cand,   &u_cand,   &b_cand};
    }

    std::vector<const ParamTensor*> GruCellParams::params() const
    {
        return {&w_update, &u_update, &b_update, &w_reset, &u_reset, &b_reset,
                &w_cand,   &u_cand,   &b_cand};
    }

    Tape::NodeId GruCellParams::step(Tape& tape, Tape::NodeId x, Tape::NodeId h_prev)
    {
        const auto z = tape.sigmoid(tape.add(tape.affine(w_update, b_update, x),
                                             tape.matvec(u_update, h_prev)));
        const auto r = tape.sigmoid(tape.add(tape.affine(w_reset, b_reset, x),
                                             tape.matvec(u_reset, h_prev)));
        const auto cand = tape.tanh_fn(tape.add(tape.affine(w_cand, b_cand, x),
                                                tape.matvec(u_cand, tape.hadamard(r, h_prev))));
        return tape.add(tape.hadamard(z, h_prev), tape.hadamard(tape.one_minus(z), cand));
    }

    std::vector<double> gru_step(const GruCellParams& cell, std::span<const double> x,
                                 std::span<const double> h_prev)
    {
        if (x.size() != cell.input_dim || h_prev.size() != cell.hidden_dim)
        {
            throw DimensionError("gru_step: input or hidden dimension mismatch");
        }
        const std::size_t h = cell.hidden_dim;
        // keep the arithmetic in exactly the same order as the tape version
        auto gate = [&](const ParamTensor& w, const ParamTensor& u, const ParamTensor& b,
                        std::span<const double> hh) {
            std::vector<double> out(h);
            for (std::size_t i = 0; i < h; ++i)
            {
                double acc = b.at(i);
                const std::size_t wb = i * cell.input_dim;
                for (std::size_t j = 0; j < cell.input_dim; ++j)
                {
                    acc += w.at(wb + j) * x[j];
                }
                double acc2 = 0;
                const std::size_t ub = i * h;
                for (std::size_t j = 0; j < h; ++j)
                {
                    acc2 += u.at(ub + j) * hh[j];
                }
                out[i] = acc + acc2;
            }
            return out;
        };
        std::vector<double> z = gate(cell.w_update, cell.u_update, cell.b_update, h_prev);
        std::vector<double> r = gate(cell.w_reset, cell.u_reset, cell.b_reset, h_prev);
        for (std::size_t i = 0; i < h; ++i)
        {
            z[i] = 1.0 / (1.0 + std::exp(-z[i]));
            r[i] = 1.0 / (1.0 + std::exp(-r[i]));
        }
        std::vector<double> rh(h);
        for (std::size_t i = 0; i < h; ++i)
        {
            rh[i] = r[i] * h_prev[i];
        }
        std::vector<double> cand = gate(cell.w_cand, cell.u_cand, cell.b_cand, rh);
        std::vector<double> out(h);
        for (std::size_t i = 0; i < h; ++i)
        {
            cand[i] = std::tanh(cand[i]);
            out[i] = z[i] * h_prev[i] + (1.0 - z[i]) * cand[i];
        }
        return out;
    }

    std::vector<std::vector<double>> gru_forward(const GruCellParams& cell,
                                                 std::span<const std::vector<double>> inputs,
                                                 const std::vector<double>& h0)
    {
        if (h0.size() != cell.hidden_dim)
        {
            throw DimensionError("gru_forward: h0 dimension mismatch");
        }
        std::vector<std::vector<double>> states;
        states.reserve(inputs.size());
        std::vector<double> h = h0;
        for (const auto& x : inputs)
        {
            h = gru_step(cell, x, h);
            states.push_back(h);
        }
        return states;
    }

    std::vector<double> dense_forward(const ParamTensor& w, const ParamTensor& b,
                                      std::span<const double> x)
    {
        if (w.cols() != x.size() || b.size() != w.rows())
        {
            throw DimensionError("dense_forward: shape mismatch");
        }
        std::vector<double> out(w.rows());
        for (std::size_t i = 0; i < w.rows(); ++i)
        {
            double acc = b.at(i);
            const std::size_t base = i * w.cols();
            for (std::size_t j = 0; j < w.cols(); ++j)
            {
                acc += w.at(base + j) * x[j];
            }
            out[i] = acc;
        }
        return out;
    }

    std::pair<double, std::vector<double>> softmax_cross_entropy(std::span<const double> scores,
                                                                 std::size_t target)
    {
        if (target >= scores.size())
        {
            throw std::out_of_range("softmax_cross_entropy: target out of range");
        }
        const double m = *std::max_element(scores.begin(), scores.end());
        double z = 0;
        std::vector<double> probs(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i)
        {
            probs[i] = std::exp(scores[i] - m);
            z += probs[i];
        }
        for (double& p : probs)
        {
            p /= z;
        }
        return {std::log(z) + m - scores[target], std::move(probs)};
    }

    std::vector<double> softmax(std::span<const double> scores)
    {
        if (scores.empty())
        {
            return {};
        }
        const double m = *std::max_element(scores.begin(), scores.end());
        double z = 0;
        std::vector<double> out(scores.size());
        for (std::size_t i = 0; i < scores.size(); ++i)
        {
            out[i] = std::exp(scores[i] - m);
            z += out[i];
        }
        for (double& v : out)
        {
            v /= z;
        }
        return out;
    }

    void Adagrad::reset(std::span<ParamTensor* const> params)
    {
        accum.clear();
        accum.reserve(params.size());
        for (const ParamTensor* p : params)
        {
            accum.emplace_back(p->size(), 0.0);
        }
    }

    void Adagrad::step(std::span<ParamTensor* const> params)
    {
        if (accum.size() != params.size())
        {
            throw std::logic_error("Adagrad::step: call reset() with the same parameter list first");
        }
        for (std::size_t k = 0; k < params.size(); ++k)
        {
            ParamTensor& p = *params[k];
            auto& acc = accum[k];
            if (acc.size() != p.size())
            {
                throw std::logic_error("Adagrad::step: parameter size changed");
            }
            for (std::size_t i = 0; i < p.size(); ++i)
            {
                if (p.mask[i] == 0)
                {
                    continue;
                }
                const double g = p.grad[i];
                acc[i] += g * g;
                p.values[i] -= learning_rate * g / (std::sqrt(acc[i]) + epsilon);
            }
        }
    }

    double finite_diff_check(const std::function<double()>& loss_fn,
                             std::span<ParamTensor* const> params, double eps,
                             const std::function<bool(const ParamTensor&, std::size_t)>& skip)
    {
        if (eps <= 0)
        {
            throw std::invalid_argument("finite_diff_check: eps must be positive");
        }
        double max_rel = 0;
        for (ParamTensor* p : params)
        {
            for (std::size_t i = 0; i < p->size(); ++i)
            {
                if (skip && skip(*p, i))
                {
                    continue;
                }
                const double saved = p->values[i];
                p->values[i] = saved + eps;
                const double f_plus = loss_fn();
                p->values[i] = saved - eps;
                const double f_minus = loss_fn();
                p->values[i] = saved;
                const double numeric = (f_plus - f_minus) / (2.0 * eps);
                const double analytic = p->grad[i];
                const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
                max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
            }
        }
        return max_rel;
    }
}
