#ifndef INSURTREND_LSTM_HPP
#define INSURTREND_LSTM_HPP

#include "insurtrend/common.hpp"
#include "insurtrend/latent.hpp"
#include "insurtrend/ratios.hpp"
#include "insurtrend/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace insurtrend::lstm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Gate slots in W, R and b.
enum Gate : std::size_t { kBlock = 0, kInput = 1, kForget = 2, kOutput = 3 };
inline constexpr std::array<std::string_view, 4> kGateSuffix{"g", "i", "f", "o"};

/// Single-layer peephole LSTM with a scalar bottleneck head and an affine
/// decoder back to the feature space.
///
/// Every parameter is a dense matrix; vectors are n x 1.
struct LstmParams {
    std::array<Matrix, 4> W;  // hidden x features
    std::array<Matrix, 4> R;  // hidden x hidden
    std::array<Matrix, 4> b;  // hidden x 1
    Matrix p_i, p_f, p_o;     // hidden x 1 peepholes
    Matrix W_z;               // 1 x hidden
    Matrix b_z;               // 1 x 1
    Matrix W_r;               // features x 1
    Matrix b_r;               // features x 1

    LstmParams() = default;
    LstmParams(std::size_t hidden, std::size_t features) {
        const auto y = static_cast<Eigen::Index>(hidden), f = static_cast<Eigen::Index>(features);
        for (std::size_t g = 0; g < 4; ++g) {
            W[g] = Matrix::Zero(y, f);
            R[g] = Matrix::Zero(y, y);
            b[g] = Matrix::Zero(y, 1);
        }
        p_i = p_f = p_o = Matrix::Zero(y, 1);
        W_z = Matrix::Zero(1, y);
        b_z = Matrix::Zero(1, 1);
        W_r = Matrix::Zero(f, 1);
        b_r = Matrix::Zero(f, 1);
    }

    std::size_t hidden() const { return static_cast<std::size_t>(W[0].rows()); }
    std::size_t features() const { return static_cast<std::size_t>(W[0].cols()); }

    /// Visits every tensor in the fixed serialization order.
    template <typename Self, typename Fn>
    static void visit(Self& self, Fn&& fn) {
        for (std::size_t g = 0; g < 4; ++g) fn(std::string("W_") + kGateSuffix[g].data(), self.W[g]);
        for (std::size_t g = 0; g < 4; ++g) fn(std::string("R_") + kGateSuffix[g].data(), self.R[g]);
        for (std::size_t g = 0; g < 4; ++g) fn(std::string("b_") + kGateSuffix[g].data(), self.b[g]);
        fn(std::string("p_i"), self.p_i);
        fn(std::string("p_f"), self.p_f);
        fn(std::string("p_o"), self.p_o);
        fn(std::string("W_z"), self.W_z);
        fn(std::string("b_z"), self.b_z);
        fn(std::string("W_r"), self.W_r);
        fn(std::string("b_r"), self.b_r);
    }
    template <typename Fn>
    void for_each(Fn&& fn) { visit(*this, std::forward<Fn>(fn)); }
    template <typename Fn>
    void for_each(Fn&& fn) const { visit(*this, std::forward<Fn>(fn)); }

    std::size_t size() const {
        std::size_t n = 0;
        for_each([&](const std::string&, const Matrix& m) { n += static_cast<std::size_t>(m.size()); });
        return n;
    }

    bool operator==(const LstmParams& o) const {
        bool eq = hidden() == o.hidden() && features() == o.features();
        if (!eq) return false;
        std::vector<const Matrix*> mine, theirs;
        for_each([&](const std::string&, const Matrix& m) { mine.push_back(&m); });
        o.for_each([&](const std::string&, const Matrix& m) { theirs.push_back(&m); });
        for (std::size_t k = 0; k < mine.size() && eq; ++k) eq = *mine[k] == *theirs[k];
        return eq;
    }
};

/// Weights uniform in [-1/sqrt(hidden), 1/sqrt(hidden)]; biases and peepholes zero.
inline LstmParams init_params(std::size_t hidden, std::size_t features, Rng& rng) {
    LstmParams p(hidden, features);
    const double k = 1.0 / std::sqrt(static_cast<double>(hidden));
    p.for_each([&](const std::string& name, Matrix& m) {
        if (name[0] != 'W' && name[0] != 'R') return;
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-k, k);
    });
    return p;
}

struct LstmState {
    Vector c;
    Vector h;

    static LstmState zero(std::size_t hidden) {
        return {Vector::Zero(static_cast<Eigen::Index>(hidden)), Vector::Zero(static_cast<Eigen::Index>(hidden))};
    }
};

/// Everything one step produces, kept for backpropagation.
struct StepTrace {
    Vector input;
    Vector c_prev, h_prev;
    Vector g, i, f, o;
    Vector c, tanh_c, h;
    double z = 0.0;
    Vector recon;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// One time step. Input and forget peepholes read the previous cell state;
/// the output gate peephole reads the updated one.
inline StepTrace lstm_step(const LstmParams& p, const LstmState& s, const Vector& r) {
    StepTrace t;
    t.input = r;
    t.c_prev = s.c;
    t.h_prev = s.h;
    const auto pre = [&](std::size_t gate) -> Vector { return p.W[gate] * r + p.R[gate] * s.h + p.b[gate]; };
    t.g = pre(kBlock).array().tanh();
    t.i = (pre(kInput).array() + p.p_i.array() * s.c.array()).unaryExpr(&sigmoid);
    t.f = (pre(kForget).array() + p.p_f.array() * s.c.array()).unaryExpr(&sigmoid);
    t.c = t.f.array() * s.c.array() + t.i.array() * t.g.array();
    t.o = (pre(kOutput).array() + p.p_o.array() * t.c.array()).unaryExpr(&sigmoid);
    t.tanh_c = t.c.array().tanh();
    t.h = t.tanh_c.array() * t.o.array();
    t.z = (p.W_z * t.h)(0, 0) + p.b_z(0, 0);
    t.recon = p.W_r * t.z + p.b_r;
    return t;
}

struct SequenceTrace {
    std::vector<StepTrace> steps;

    Vector z() const {
        Vector out(static_cast<Eigen::Index>(steps.size()));
        for (std::size_t j = 0; j < steps.size(); ++j) out(static_cast<Eigen::Index>(j)) = steps[j].z;
        return out;
    }
};

/// Runs the sequence (rows = time steps) from the zero state.
inline SequenceTrace forward_sequence(const LstmParams& p, const Matrix& series) {
    if (series.rows() < 1) throw Error("forward_sequence needs at least one time step");
    if (static_cast<std::size_t>(series.cols()) != p.features()) throw Error("series feature count mismatch");
    SequenceTrace tr;
    tr.steps.reserve(static_cast<std::size_t>(series.rows()));
    LstmState s = LstmState::zero(p.hidden());
    for (Eigen::Index j = 0; j < series.rows(); ++j) {
        tr.steps.push_back(lstm_step(p, s, series.row(j).transpose()));
        const auto& st = tr.steps.back();
        if (!std::isfinite(st.z) || !st.c.allFinite() || !st.h.allFinite() || !st.recon.allFinite()) {
            throw TrainingError("non-finite activation at time step " + std::to_string(j + 1));
        }
        s.c = st.c;
        s.h = st.h;
    }
    return tr;
}

/// Mean of squared residuals over all entries.
inline double mse_loss(std::span<const double> target, std::span<const double> recon) {
    if (target.size() != recon.size()) throw Error("mse_loss: shape mismatch");
    if (target.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k) {
        const double d = target[k] - recon[k];
        s += d * d;
    }
    return s / static_cast<double>(target.size());
}

/// Backpropagation through time. `d_recon` is dLoss/dRecon (rows = steps).
/// Gradients are accumulated into `grads`.
inline void backward_sequence(const LstmParams& p, const SequenceTrace& tr, const Matrix& d_recon, LstmParams& grads) {
    const auto y = static_cast<Eigen::Index>(p.hidden());
    Vector dh_next = Vector::Zero(y), dc_next = Vector::Zero(y);
    for (std::size_t jj = tr.steps.size(); jj-- > 0;) {
        const StepTrace& t = tr.steps[jj];
        const Vector dr = d_recon.row(static_cast<Eigen::Index>(jj)).transpose();

        grads.W_r += dr * t.z;
        grads.b_r += dr;
        const double dz = (p.W_r.transpose() * dr)(0, 0);
        grads.W_z += dz * t.h.transpose();
        grads.b_z(0, 0) += dz;

        const Vector dh = dz * p.W_z.transpose() + dh_next;
        const Vector d_o = dh.array() * t.tanh_c.array();
        Vector dc = dh.array() * t.o.array() * (1.0 - t.tanh_c.array().square()) + dc_next.array();
        const Vector da_o = d_o.array() * t.o.array() * (1.0 - t.o.array());
        dc.array() += da_o.array() * p.p_o.array();
        grads.p_o += da_o.cwiseProduct(t.c);

        const Vector da_i = (dc.array() * t.g.array() * t.i.array() * (1.0 - t.i.array())).matrix();
        const Vector da_f = (dc.array() * t.c_prev.array() * t.f.array() * (1.0 - t.f.array())).matrix();
        const Vector da_g = (dc.array() * t.i.array() * (1.0 - t.g.array().square())).matrix();
        grads.p_i += da_i.cwiseProduct(t.c_prev);
        grads.p_f += da_f.cwiseProduct(t.c_prev);

        Vector dc_prev = dc.array() * t.f.array() + da_i.array() * p.p_i.array() + da_f.array() * p.p_f.array();
        Vector dh_prev = Vector::Zero(y);
        const std::array<const Vector*, 4> da{&da_g, &da_i, &da_f, &da_o};
        for (std::size_t g = 0; g < 4; ++g) {
            grads.W[g] += *da[g] * t.input.transpose();
            grads.R[g] += *da[g] * t.h_prev.transpose();
            grads.b[g] += *da[g];
            dh_prev += p.R[g].transpose() * *da[g];
        }
        dh_next = std::move(dh_prev);
        dc_next = std::move(dc_prev);
    }
}

/// Copies company `i` of a tensor into a (periods x features) matrix.
inline Matrix company_series(const RatioTensor& t, std::size_t i) {
    Matrix m(static_cast<Eigen::Index>(t.num_periods()), static_cast<Eigen::Index>(t.features));
    for (std::size_t j = 0; j < t.num_periods(); ++j)
        for (std::size_t f = 0; f < t.features; ++f)
            m(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(f)) = t.at(i, j, f);
    return m;
}

struct BatchResult {
    double loss = 0.0;                    // mean over batch * J * F entries
    std::vector<double> company_sse;      // per batch member, same order as the batch
    LstmParams grads;
};

/// Reconstruction MSE over the listed companies and its exact gradient.
inline BatchResult batch_loss_and_gradient(const LstmParams& p, const RatioTensor& t,
                                           std::span<const std::size_t> batch) {
    BatchResult out;
    out.grads = LstmParams(p.hidden(), p.features());
    const double count = static_cast<double>(batch.size() * t.num_periods() * t.features);
    double total = 0.0;
    for (const std::size_t i : batch) {
        const Matrix series = company_series(t, i);
        const SequenceTrace tr = forward_sequence(p, series);
        Matrix residual(series.rows(), series.cols());
        for (Eigen::Index j = 0; j < series.rows(); ++j)
            residual.row(j) = tr.steps[static_cast<std::size_t>(j)].recon.transpose() - series.row(j);
        const double sse = residual.squaredNorm();
        out.company_sse.push_back(sse);
        total += sse;
        backward_sequence(p, tr, residual * (2.0 / count), out.grads);
    }
    out.loss = count > 0.0 ? total / count : 0.0;
    return out;
}

struct TrainConfig {
    std::size_t hidden = 64;
    std::size_t epochs = 12;
    std::size_t batch_size = 16;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const {
        if (hidden < 1) throw Error("lstm hidden size must be >= 1");
        if (epochs < 1) throw Error("lstm epochs must be >= 1");
        if (batch_size < 1) throw Error("lstm batch size must be >= 1");
        if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw Error("learning rate must be >= 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw Error("Adam decays must lie in [0,1)");
        if (!(epsilon > 0.0)) throw Error("Adam epsilon must be > 0");
    }
};

/// Adam moment estimates, persisted across steps.
struct AdamState {
    LstmParams m, v;
    std::uint64_t step = 0;

    AdamState() = default;
    explicit AdamState(const LstmParams& like) : m(like.hidden(), like.features()), v(like.hidden(), like.features()) {}
};

/// One bias-corrected Adam step; increments the step counter first.
inline void adam_update(LstmParams& params, const LstmParams& grads, AdamState& state, const TrainConfig& cfg) {
    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    std::vector<Matrix*> ps, ms, vs;
    std::vector<const Matrix*> gs;
    params.for_each([&](const std::string&, Matrix& x) { ps.push_back(&x); });
    state.m.for_each([&](const std::string&, Matrix& x) { ms.push_back(&x); });
    state.v.for_each([&](const std::string&, Matrix& x) { vs.push_back(&x); });
    grads.for_each([&](const std::string&, const Matrix& x) { gs.push_back(&x); });
    for (std::size_t k = 0; k < ps.size(); ++k) {
        auto m = ms[k]->array();
        auto v = vs[k]->array();
        const auto g = gs[k]->array();
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g.square();
        ps[k]->array() -= cfg.learning_rate * (m / c1) / ((v / c2).sqrt() + cfg.epsilon);
    }
}

struct TrainResult {
    LstmParams params;
    std::vector<double> loss_history;  // epoch-mean reconstruction MSE
};

/// Mini-batch Adam training. Companies are reshuffled each epoch; the last
/// partial batch is kept. The recorded epoch loss is the mean over all
/// N * J * F entries, evaluated with the parameters each batch saw.
inline TrainResult train(const RatioTensor& tensor, const TrainConfig& cfg) {
    cfg.validate();
    if (tensor.num_companies() == 0 || tensor.num_periods() == 0) throw Error("cannot train on an empty tensor");
    Rng rng(cfg.seed);
    TrainResult out{init_params(cfg.hidden, tensor.features, rng), {}};
    AdamState adam(out.params);

    std::vector<std::size_t> order(tensor.num_companies());
    const double entries = static_cast<double>(tensor.num_companies() * tensor.num_periods() * tensor.features);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        // Summed per company in index order.
        std::vector<double> sse(tensor.num_companies(), 0.0);
        std::size_t batch_no = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
            const std::size_t len = std::min(cfg.batch_size, order.size() - start);
            const std::span<const std::size_t> batch(order.data() + start, len);
            const auto where = "epoch " + std::to_string(epoch + 1) + ", batch " + std::to_string(batch_no + 1);
            BatchResult br;
            try {
                br = batch_loss_and_gradient(out.params, tensor, batch);
            } catch (const TrainingError& e) {
                throw TrainingError(where + ": " + e.what());
            }
            if (!std::isfinite(br.loss)) throw TrainingError(where + ": non-finite loss");
            for (std::size_t k = 0; k < len; ++k) sse[batch[k]] = br.company_sse[k];
            adam_update(out.params, br.grads, adam, cfg);
        }
        double total = 0.0;
        for (double s : sse) total += s;
        out.loss_history.push_back(total / entries);
    }
    return out;
}

/// Bottleneck output for every company and period.
inline LatentSeries encode(const LstmParams& p, const RatioTensor& t) {
    LatentSeries l{t.companies, t.periods, {}};
    l.z.reserve(t.num_companies());
    for (std::size_t i = 0; i < t.num_companies(); ++i) {
        const auto z = forward_sequence(p, company_series(t, i)).z();
        l.z.emplace_back(z.data(), z.data() + z.size());
    }
    return l;
}

// --- checkpoint ---------------------------------------------------------------

inline constexpr std::string_view kCheckpointMagic = "insurtrend-lstm-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline std::string checkpoint_to_string(const LstmParams& p, const TrainConfig& cfg) {
    std::ostringstream os;
    os << kCheckpointMagic << ' ' << kCheckpointVersion << '\n'
       << "hidden " << p.hidden() << '\n'
       << "features " << p.features() << '\n'
       << "seed " << cfg.seed << '\n'
       << "epochs " << cfg.epochs << '\n'
       << "batch_size " << cfg.batch_size << '\n'
       << "learning_rate " << format_double(cfg.learning_rate) << '\n'
       << "beta1 " << format_double(cfg.beta1) << '\n'
       << "beta2 " << format_double(cfg.beta2) << '\n'
       << "epsilon " << format_double(cfg.epsilon) << '\n';
    p.for_each([&](const std::string& name, const Matrix& m) {
        os << "tensor " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) os << (c ? " " : "") << format_double(m(r, c));
            os << '\n';
        }
    });
    os << "end\n";
    return os.str();
}

struct Checkpoint {
    LstmParams params;
    TrainConfig config;
};

inline Checkpoint checkpoint_from_string(const std::string& text) {
    std::istringstream in(text);
    std::string magic, key;
    int version = 0;
    in >> magic >> version;
    if (magic != kCheckpointMagic) throw Error("not an LSTM checkpoint");
    if (version != kCheckpointVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
    Checkpoint ck;
    std::size_t hidden = 0, features = 0;
    auto expect = [&](const char* name) {
        in >> key;
        if (key != name) throw Error(std::string("checkpoint: expected '") + name + "', got '" + key + "'");
    };
    auto read_double = [&]() {
        std::string s;
        in >> s;
        double v = 0.0;
        if (!parse_double(s, v)) throw Error("checkpoint: bad number '" + s + "'");
        return v;
    };
    expect("hidden"), in >> hidden;
    expect("features"), in >> features;
    expect("seed"), in >> ck.config.seed;
    expect("epochs"), in >> ck.config.epochs;
    expect("batch_size"), in >> ck.config.batch_size;
    expect("learning_rate"), ck.config.learning_rate = read_double();
    expect("beta1"), ck.config.beta1 = read_double();
    expect("beta2"), ck.config.beta2 = read_double();
    expect("epsilon"), ck.config.epsilon = read_double();
    if (!in || hidden == 0 || features == 0) throw Error("checkpoint: malformed header");
    ck.config.hidden = hidden;
    ck.params = LstmParams(hidden, features);
    ck.params.for_each([&](const std::string& name, Matrix& m) {
        std::string tag, got;
        Eigen::Index rows = 0, cols = 0;
        in >> tag >> got >> rows >> cols;
        if (tag != "tensor" || got != name || rows != m.rows() || cols != m.cols()) {
            throw Error("checkpoint: expected tensor " + name + " with shape " + std::to_string(m.rows()) + "x" +
                        std::to_string(m.cols()));
        }
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_double();
    });
    in >> key;
    if (key != "end") throw Error("checkpoint: missing end marker");
    return ck;
}

}  // namespace insurtrend::lstm

#endif
