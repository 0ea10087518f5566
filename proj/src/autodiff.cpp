#include "spfit/autodiff.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "spfit/fft.hpp"

namespace spfit::ad {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("autodiff: " + msg); }

}  // namespace

const char* Tape::op_name(Op op) {
    switch (op) {
        case Op::Input: return "input";
        case Op::Constant: return "constant";
        case Op::Param: return "param";
        case Op::Conv1d: return "conv1d";
        case Op::BatchNorm: return "batchnorm";
        case Op::LeakyRelu: return "leaky_relu";
        case Op::AvgPool: return "avg_pool";
        case Op::UpsampleLinear: return "upsample_linear";
        case Op::Concat: return "concat";
        case Op::PadEdgeCols: return "pad_edge_cols";
        case Op::CropCols: return "crop_cols";
        case Op::ZeroPadCols: return "zero_pad_cols";
        case Op::GatherCols: return "gather_cols";
        case Op::MirrorEven: return "mirror_even";
        case Op::ScaleCols: return "scale_cols";
        case Op::ScaleRows: return "scale_rows";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Scale: return "scale";
        case Op::CDft: return "cdft";
        case Op::CDftInverse: return "cdft_inverse";
        case Op::RfftPair: return "rfft_pair";
        case Op::IrfftPair: return "irfft_pair";
        case Op::ThirdDiff: return "third_diff";
        case Op::ComplexAbsSum: return "complex_abs_sum";
        case Op::SumSquares: return "sum_squares";
        case Op::SumAbs: return "sum_abs";
    }
    return "?";
}

const Tape::Rec& Tape::at(Node n) const {
    if (!n.valid() || n.id >= static_cast<int>(recs_.size())) fail("invalid node handle");
    return recs_[static_cast<std::size_t>(n.id)];
}

int Tape::rows(Node n) const { return static_cast<int>(at(n).value.rows()); }
int Tape::cols(Node n) const { return static_cast<int>(at(n).value.cols()); }
bool Tape::requires_grad(Node n) const { return at(n).needs_grad; }

Node Tape::push(Rec rec) {
    recs_.push_back(std::move(rec));
    return Node{static_cast<int>(recs_.size()) - 1};
}

Node Tape::input(int r, int c) {
    if (r < 1 || c < 1) fail("input: bad shape");
    Rec rec;
    rec.op = Op::Input;
    rec.value = Matrix::Zero(r, c);
    return push(std::move(rec));
}

Node Tape::constant(Matrix v) {
    Rec rec;
    rec.op = Op::Constant;
    rec.value = std::move(v);
    return push(std::move(rec));
}

Node Tape::param(Matrix v) {
    Rec rec;
    rec.op = Op::Param;
    rec.value = std::move(v);
    rec.needs_grad = true;
    return push(std::move(rec));
}

Node Tape::conv1d(Node x, Node w, Node b) {
    const auto& rx = at(x);
    const auto& rw = at(w);
    const auto& rb = at(b);
    const int ci = static_cast<int>(rx.value.rows());
    const int co = static_cast<int>(rw.value.rows());
    if (rw.value.cols() != 3 * ci) fail("conv1d: weight must be c_out x (3*c_in)");
    if (rb.value.rows() != co || rb.value.cols() != 1) fail("conv1d: bias must be c_out x 1");
    Rec rec;
    rec.op = Op::Conv1d;
    rec.a = x.id;
    rec.b = w.id;
    rec.c = b.id;
    rec.needs_grad = rx.needs_grad || rw.needs_grad || rb.needs_grad;
    rec.value = Matrix::Zero(co, rx.value.cols());
    return push(std::move(rec));
}

Node Tape::batchnorm(Node x, Node gamma, Node beta, double eps) {
    const auto& rx = at(x);
    if (eps <= 0.0) fail("batchnorm: eps must be positive");
    if (at(gamma).value.rows() != rx.value.rows() || at(gamma).value.cols() != 1)
        fail("batchnorm: gamma must be c x 1");
    if (at(beta).value.rows() != rx.value.rows() || at(beta).value.cols() != 1)
        fail("batchnorm: beta must be c x 1");
    Rec rec;
    rec.op = Op::BatchNorm;
    rec.a = x.id;
    rec.b = gamma.id;
    rec.c = beta.id;
    rec.scalar = eps;
    rec.needs_grad = rx.needs_grad || at(gamma).needs_grad || at(beta).needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), rx.value.cols());
    return push(std::move(rec));
}

Node Tape::leaky_relu(Node x, double slope) {
    if (!(slope > 0.0 && slope < 1.0)) fail("leaky_relu: slope must be in (0,1)");
    Rec rec;
    rec.op = Op::LeakyRelu;
    rec.a = x.id;
    rec.scalar = slope;
    rec.needs_grad = at(x).needs_grad;
    rec.value = Matrix::Zero(at(x).value.rows(), at(x).value.cols());
    return push(std::move(rec));
}

Node Tape::avg_pool(Node x) {
    const auto& rx = at(x);
    if (rx.value.cols() % 2 != 0) fail("avg_pool: length must be even");
    Rec rec;
    rec.op = Op::AvgPool;
    rec.a = x.id;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), rx.value.cols() / 2);
    return push(std::move(rec));
}

Node Tape::upsample_linear(Node x, int out_len) {
    const auto& rx = at(x);
    const int L = static_cast<int>(rx.value.cols());
    if (out_len < L) fail("upsample_linear: out_len must be >= input length");
    Rec rec;
    rec.op = Op::UpsampleLinear;
    rec.a = x.id;
    rec.out_len = out_len;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), out_len);
    // Sample positions j*L/out_len on the edge-replicated piecewise-linear
    // continuum through the input samples.
    rec.indices.resize(static_cast<std::size_t>(out_len));
    rec.weights.resize(out_len);
    for (int j = 0; j < out_len; ++j) {
        const double u = static_cast<double>(j) * L / out_len;
        int i0 = static_cast<int>(std::floor(u));
        if (i0 > L - 1) i0 = L - 1;
        rec.indices[static_cast<std::size_t>(j)] = i0;
        rec.weights[j] = u - i0;
    }
    return push(std::move(rec));
}

Node Tape::concat(Node a, Node b) {
    const auto& ra = at(a);
    const auto& rb = at(b);
    if (ra.value.cols() != rb.value.cols()) fail("concat: length mismatch");
    Rec rec;
    rec.op = Op::Concat;
    rec.a = a.id;
    rec.b = b.id;
    rec.needs_grad = ra.needs_grad || rb.needs_grad;
    rec.value = Matrix::Zero(ra.value.rows() + rb.value.rows(), ra.value.cols());
    return push(std::move(rec));
}

Node Tape::pad_edge_cols(Node x, int out_len) {
    const auto& rx = at(x);
    if (out_len < rx.value.cols()) fail("pad_edge_cols: out_len too small");
    Rec rec;
    rec.op = Op::PadEdgeCols;
    rec.a = x.id;
    rec.out_len = out_len;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), out_len);
    return push(std::move(rec));
}

Node Tape::crop_cols(Node x, int out_len) {
    const auto& rx = at(x);
    if (out_len > rx.value.cols() || out_len < 1) fail("crop_cols: bad out_len");
    Rec rec;
    rec.op = Op::CropCols;
    rec.a = x.id;
    rec.out_len = out_len;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), out_len);
    return push(std::move(rec));
}

Node Tape::zero_pad_cols(Node x, int out_len) {
    const auto& rx = at(x);
    if (out_len < rx.value.cols()) fail("zero_pad_cols: out_len too small");
    Rec rec;
    rec.op = Op::ZeroPadCols;
    rec.a = x.id;
    rec.out_len = out_len;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), out_len);
    return push(std::move(rec));
}

Node Tape::gather_cols(Node x, std::vector<int> indices) {
    const auto& rx = at(x);
    for (int idx : indices)
        if (idx < 0 || idx >= rx.value.cols()) fail("gather_cols: index out of range");
    Rec rec;
    rec.op = Op::GatherCols;
    rec.a = x.id;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), static_cast<Eigen::Index>(indices.size()));
    rec.indices = std::move(indices);
    return push(std::move(rec));
}

Node Tape::mirror_even(Node x) {
    const auto& rx = at(x);
    Rec rec;
    rec.op = Op::MirrorEven;
    rec.a = x.id;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), 2 * rx.value.cols());
    return push(std::move(rec));
}

Node Tape::scale_cols(Node x, Vector weights) {
    const auto& rx = at(x);
    if (weights.size() != rx.value.cols()) fail("scale_cols: weight length mismatch");
    Rec rec;
    rec.op = Op::ScaleCols;
    rec.a = x.id;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), rx.value.cols());
    rec.weights = std::move(weights);
    return push(std::move(rec));
}

Node Tape::scale_rows(Node x, Vector weights) {
    const auto& rx = at(x);
    if (weights.size() != rx.value.rows()) fail("scale_rows: weight length mismatch");
    Rec rec;
    rec.op = Op::ScaleRows;
    rec.a = x.id;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), rx.value.cols());
    rec.weights = std::move(weights);
    return push(std::move(rec));
}

Node Tape::add(Node a, Node b) {
    const auto& ra = at(a);
    const auto& rb = at(b);
    if (ra.value.rows() != rb.value.rows() || ra.value.cols() != rb.value.cols())
        fail("add: shape mismatch");
    Rec rec;
    rec.op = Op::Add;
    rec.a = a.id;
    rec.b = b.id;
    rec.needs_grad = ra.needs_grad || rb.needs_grad;
    rec.value = Matrix::Zero(ra.value.rows(), ra.value.cols());
    return push(std::move(rec));
}

Node Tape::sub(Node a, Node b) {
    const auto& ra = at(a);
    const auto& rb = at(b);
    if (ra.value.rows() != rb.value.rows() || ra.value.cols() != rb.value.cols())
        fail("sub: shape mismatch");
    Rec rec;
    rec.op = Op::Sub;
    rec.a = a.id;
    rec.b = b.id;
    rec.needs_grad = ra.needs_grad || rb.needs_grad;
    rec.value = Matrix::Zero(ra.value.rows(), ra.value.cols());
    return push(std::move(rec));
}

Node Tape::scale(Node x, double factor) {
    Rec rec;
    rec.op = Op::Scale;
    rec.a = x.id;
    rec.scalar = factor;
    rec.needs_grad = at(x).needs_grad;
    rec.value = Matrix::Zero(at(x).value.rows(), at(x).value.cols());
    return push(std::move(rec));
}

Node Tape::cdft(Node x, bool inverse) {
    const auto& rx = at(x);
    if (rx.value.rows() % 2 != 0) fail("cdft: needs an even channel count (re, im pairs)");
    Rec rec;
    rec.op = inverse ? Op::CDftInverse : Op::CDft;
    rec.a = x.id;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), rx.value.cols());
    return push(std::move(rec));
}

Node Tape::rfft_pair(Node x) {
    const auto& rx = at(x);
    Rec rec;
    rec.op = Op::RfftPair;
    rec.a = x.id;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(2 * rx.value.rows(), rx.value.cols());
    return push(std::move(rec));
}

Node Tape::irfft_pair(Node x) {
    const auto& rx = at(x);
    if (rx.value.rows() % 2 != 0) fail("irfft_pair: needs (re, im) channel pairs");
    Rec rec;
    rec.op = Op::IrfftPair;
    rec.a = x.id;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows() / 2, rx.value.cols());
    return push(std::move(rec));
}

Node Tape::third_diff(Node x) {
    const auto& rx = at(x);
    if (rx.value.cols() < 4) fail("third_diff: needs at least 4 samples");
    Rec rec;
    rec.op = Op::ThirdDiff;
    rec.a = x.id;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(rx.value.rows(), rx.value.cols() - 3);
    return push(std::move(rec));
}

Node Tape::complex_abs_sum(Node x) {
    const auto& rx = at(x);
    if (rx.value.rows() % 2 != 0) fail("complex_abs_sum: needs (re, im) channel pairs");
    Rec rec;
    rec.op = Op::ComplexAbsSum;
    rec.a = x.id;
    rec.needs_grad = rx.needs_grad;
    rec.value = Matrix::Zero(1, 1);
    return push(std::move(rec));
}

Node Tape::sum_squares(Node x) {
    Rec rec;
    rec.op = Op::SumSquares;
    rec.a = x.id;
    rec.needs_grad = at(x).needs_grad;
    rec.value = Matrix::Zero(1, 1);
    return push(std::move(rec));
}

Node Tape::sum_abs(Node x) {
    Rec rec;
    rec.op = Op::SumAbs;
    rec.a = x.id;
    rec.needs_grad = at(x).needs_grad;
    rec.value = Matrix::Zero(1, 1);
    return push(std::move(rec));
}

void Tape::set_value(Node leaf, const Matrix& v) {
    Rec& rec = recs_[static_cast<std::size_t>(leaf.id)];
    if (rec.op != Op::Input && rec.op != Op::Constant && rec.op != Op::Param)
        fail("set_value: not a leaf node");
    if (v.rows() != rec.value.rows() || v.cols() != rec.value.cols())
        fail("set_value: shape mismatch");
    rec.value = v;
}

Matrix& Tape::value(Node n) { return recs_[static_cast<std::size_t>(n.id)].value; }
const Matrix& Tape::value(Node n) const { return at(n).value; }

const Matrix& Tape::grad(Node n) const {
    if (grads_.size() != recs_.size()) fail("grad: backward has not run");
    return grads_[static_cast<std::size_t>(n.id)];
}

void Tape::check_finite(const Rec& r, int id) const {
    if (!r.value.allFinite()) {
        std::ostringstream os;
        os << "autodiff: non-finite value in " << op_name(r.op) << " node #" << id;
        throw std::runtime_error(os.str());
    }
}

void Tape::apply_pair_dft(const Matrix& in, Matrix& out, Rec& r, int sign, bool normalize) {
    const int pairs = static_cast<int>(in.rows()) / 2;
    const int n = static_cast<int>(in.cols());
    r.scratch_in.resize(static_cast<std::size_t>(n));
    r.scratch_out.resize(static_cast<std::size_t>(n));
    const double scale = normalize ? 1.0 / n : 1.0;
    for (int p = 0; p < pairs; ++p) {
        for (int t = 0; t < n; ++t)
            r.scratch_in[static_cast<std::size_t>(t)] = {in(2 * p, t), in(2 * p + 1, t)};
        fft::cdft(r.scratch_in.data(), r.scratch_out.data(), n, sign);
        for (int t = 0; t < n; ++t) {
            out(2 * p, t) = scale * r.scratch_out[static_cast<std::size_t>(t)].real();
            out(2 * p + 1, t) = scale * r.scratch_out[static_cast<std::size_t>(t)].imag();
        }
    }
}

void Tape::eval(Rec& r) {
    switch (r.op) {
        case Op::Input:
        case Op::Constant:
        case Op::Param:
            return;
        case Op::Conv1d: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            const Matrix& w = recs_[static_cast<std::size_t>(r.b)].value;
            const Matrix& b = recs_[static_cast<std::size_t>(r.c)].value;
            const int ci = static_cast<int>(x.rows());
            const int L = static_cast<int>(x.cols());
            r.aux.resize(ci, L + 2);
            r.aux.col(0).setZero();
            r.aux.middleCols(1, L) = x;
            r.aux.col(L + 1).setZero();
            r.value = b.replicate(1, L);
            for (int k = 0; k < 3; ++k)
                r.value.noalias() += w.middleCols(static_cast<Eigen::Index>(k) * ci, ci) *
                                     r.aux.middleCols(k, L);
            return;
        }
        case Op::BatchNorm: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            const Matrix& gamma = recs_[static_cast<std::size_t>(r.b)].value;
            const Matrix& beta = recs_[static_cast<std::size_t>(r.c)].value;
            const double eps = r.scalar;
            Vector mean = x.rowwise().mean();
            r.aux = x.colwise() - mean;
            Vector var = r.aux.array().square().rowwise().mean().matrix();
            r.aux_vec = (var.array() + eps).rsqrt().matrix();
            r.aux.array().colwise() *= r.aux_vec.array();  // aux = xhat
            r.value = (r.aux.array().colwise() * gamma.col(0).array()).matrix();
            r.value.array().colwise() += beta.col(0).array();
            return;
        }
        case Op::LeakyRelu: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            r.value = x.cwiseMax(r.scalar * x);
            return;
        }
        case Op::AvgPool: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            const Eigen::Index half = x.cols() / 2;
            for (Eigen::Index t = 0; t < half; ++t)
                r.value.col(t) = 0.5 * (x.col(2 * t) + x.col(2 * t + 1));
            return;
        }
        case Op::UpsampleLinear: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            const int L = static_cast<int>(x.cols());
            for (int j = 0; j < r.out_len; ++j) {
                const int i0 = r.indices[static_cast<std::size_t>(j)];
                const int i1 = std::min(i0 + 1, L - 1);
                const double w = r.weights[j];
                if (w == 0.0)
                    r.value.col(j) = x.col(i0);
                else
                    r.value.col(j) = (1.0 - w) * x.col(i0) + w * x.col(i1);
            }
            return;
        }
        case Op::Concat: {
            const Matrix& a = recs_[static_cast<std::size_t>(r.a)].value;
            const Matrix& b = recs_[static_cast<std::size_t>(r.b)].value;
            r.value.topRows(a.rows()) = a;
            r.value.bottomRows(b.rows()) = b;
            return;
        }
        case Op::PadEdgeCols: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            const Eigen::Index L = x.cols();
            r.value.leftCols(L) = x;
            for (Eigen::Index j = L; j < r.out_len; ++j) r.value.col(j) = x.col(L - 1);
            return;
        }
        case Op::CropCols: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            r.value = x.leftCols(r.out_len);
            return;
        }
        case Op::ZeroPadCols: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            r.value.setZero();
            r.value.leftCols(x.cols()) = x;
            return;
        }
        case Op::GatherCols: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            for (std::size_t c = 0; c < r.indices.size(); ++c)
                r.value.col(static_cast<Eigen::Index>(c)) = x.col(r.indices[c]);
            return;
        }
        case Op::MirrorEven: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            const int L = static_cast<int>(x.cols());
            r.value.leftCols(L) = x;
            r.value.col(L) = x.col(L - 1);
            for (int k = 1; k < L; ++k) r.value.col(2 * L - k) = x.col(k);
            return;
        }
        case Op::ScaleCols: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            r.value = (x.array().rowwise() * r.weights.transpose().array()).matrix();
            return;
        }
        case Op::ScaleRows: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            r.value = (x.array().colwise() * r.weights.array()).matrix();
            return;
        }
        case Op::Add: {
            r.value = recs_[static_cast<std::size_t>(r.a)].value +
                      recs_[static_cast<std::size_t>(r.b)].value;
            return;
        }
        case Op::Sub: {
            r.value = recs_[static_cast<std::size_t>(r.a)].value -
                      recs_[static_cast<std::size_t>(r.b)].value;
            return;
        }
        case Op::Scale: {
            r.value = r.scalar * recs_[static_cast<std::size_t>(r.a)].value;
            return;
        }
        case Op::CDft: {
            apply_pair_dft(recs_[static_cast<std::size_t>(r.a)].value, r.value, r, -1, false);
            return;
        }
        case Op::CDftInverse: {
            apply_pair_dft(recs_[static_cast<std::size_t>(r.a)].value, r.value, r, +1, true);
            return;
        }
        case Op::RfftPair: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            const int n = static_cast<int>(x.cols());
            r.scratch_in.resize(static_cast<std::size_t>(n));
            r.scratch_out.resize(static_cast<std::size_t>(n));
            for (Eigen::Index ch = 0; ch < x.rows(); ++ch) {
                for (int t = 0; t < n; ++t) r.scratch_in[static_cast<std::size_t>(t)] = {x(ch, t), 0.0};
                fft::cdft(r.scratch_in.data(), r.scratch_out.data(), n, -1);
                for (int t = 0; t < n; ++t) {
                    r.value(2 * ch, t) = r.scratch_out[static_cast<std::size_t>(t)].real();
                    r.value(2 * ch + 1, t) = r.scratch_out[static_cast<std::size_t>(t)].imag();
                }
            }
            return;
        }
        case Op::IrfftPair: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            const int n = static_cast<int>(x.cols());
            const int pairs = static_cast<int>(x.rows()) / 2;
            r.scratch_in.resize(static_cast<std::size_t>(n));
            r.scratch_out.resize(static_cast<std::size_t>(n));
            for (int p = 0; p < pairs; ++p) {
                for (int t = 0; t < n; ++t)
                    r.scratch_in[static_cast<std::size_t>(t)] = {x(2 * p, t), x(2 * p + 1, t)};
                fft::cdft(r.scratch_in.data(), r.scratch_out.data(), n, +1);
                for (int t = 0; t < n; ++t)
                    r.value(p, t) = r.scratch_out[static_cast<std::size_t>(t)].real() / n;
            }
            return;
        }
        case Op::ThirdDiff: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            const Eigen::Index m = x.cols() - 3;
            r.value = x.middleCols(3, m) - 3.0 * x.middleCols(2, m) + 3.0 * x.middleCols(1, m) -
                      x.middleCols(0, m);
            return;
        }
        case Op::ComplexAbsSum: {
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            const Eigen::Index pairs = x.rows() / 2;
            r.aux.resize(pairs, x.cols());
            double total = 0.0;
            for (Eigen::Index p = 0; p < pairs; ++p) {
                r.aux.row(p) =
                    (x.row(2 * p).array().square() + x.row(2 * p + 1).array().square()).sqrt();
                total += r.aux.row(p).sum();
            }
            r.value(0, 0) = total;
            return;
        }
        case Op::SumSquares: {
            r.value(0, 0) = recs_[static_cast<std::size_t>(r.a)].value.squaredNorm();
            return;
        }
        case Op::SumAbs: {
            r.value(0, 0) = recs_[static_cast<std::size_t>(r.a)].value.cwiseAbs().sum();
            return;
        }
    }
}

void Tape::forward() {
    for (std::size_t i = 0; i < recs_.size(); ++i) {
        eval(recs_[i]);
        check_finite(recs_[i], static_cast<int>(i));
    }
}

void Tape::backward(Node root) {
    const Rec& rroot = at(root);
    if (rroot.value.rows() != 1 || rroot.value.cols() != 1)
        fail("backward: root must be a scalar node");
    grads_.resize(recs_.size());
    for (std::size_t i = 0; i < recs_.size(); ++i) {
        if (!recs_[i].needs_grad) continue;
        Matrix& g = grads_[i];
        if (g.rows() != recs_[i].value.rows() || g.cols() != recs_[i].value.cols())
            g = Matrix::Zero(recs_[i].value.rows(), recs_[i].value.cols());
        else
            g.setZero();
    }
    if (!rroot.needs_grad) return;  // nothing depends on parameters
    grads_[static_cast<std::size_t>(root.id)](0, 0) = 1.0;
    for (int id = root.id; id >= 0; --id) {
        if (!recs_[static_cast<std::size_t>(id)].needs_grad) continue;
        adjoint(id);
    }
}

void Tape::adjoint(int id) {
    Rec& r = recs_[static_cast<std::size_t>(id)];
    const Matrix& g = grads_[static_cast<std::size_t>(id)];
    auto needs = [&](int nid) {
        return nid >= 0 && recs_[static_cast<std::size_t>(nid)].needs_grad;
    };
    auto gr = [&](int nid) -> Matrix& { return grads_[static_cast<std::size_t>(nid)]; };

    switch (r.op) {
        case Op::Input:
        case Op::Constant:
        case Op::Param:
            return;
        case Op::Conv1d: {
            const Matrix& w = recs_[static_cast<std::size_t>(r.b)].value;
            const int ci = static_cast<int>(recs_[static_cast<std::size_t>(r.a)].value.rows());
            const int L = static_cast<int>(recs_[static_cast<std::size_t>(r.a)].value.cols());
            if (needs(r.c)) gr(r.c).col(0) += g.rowwise().sum();
            if (needs(r.b)) {
                Matrix& gw = gr(r.b);
                for (int k = 0; k < 3; ++k)
                    gw.middleCols(static_cast<Eigen::Index>(k) * ci, ci).noalias() +=
                        g * r.aux.middleCols(k, L).transpose();
            }
            if (needs(r.a)) {
                // accumulate into a padded scratch, then fold into the input grad
                Matrix gpad = Matrix::Zero(ci, L + 2);
                for (int k = 0; k < 3; ++k)
                    gpad.middleCols(k, L).noalias() +=
                        w.middleCols(static_cast<Eigen::Index>(k) * ci, ci).transpose() * g;
                gr(r.a) += gpad.middleCols(1, L);
            }
            return;
        }
        case Op::BatchNorm: {
            const Matrix& gamma = recs_[static_cast<std::size_t>(r.b)].value;
            const Matrix& xhat = r.aux;
            if (needs(r.b)) gr(r.b).col(0) += (g.array() * xhat.array()).rowwise().sum().matrix();
            if (needs(r.c)) gr(r.c).col(0) += g.rowwise().sum();
            if (needs(r.a)) {
                Vector mean_g = g.rowwise().mean();
                Vector mean_gx = (g.array() * xhat.array()).rowwise().mean().matrix();
                Matrix t = g.colwise() - mean_g;
                t -= (xhat.array().colwise() * mean_gx.array()).matrix();
                t.array().colwise() *= (gamma.col(0).array() * r.aux_vec.array());
                gr(r.a) += t;
            }
            return;
        }
        case Op::LeakyRelu: {
            if (!needs(r.a)) return;
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            gr(r.a).array() +=
                (x.array() >= 0.0).select(g.array(), r.scalar * g.array());
            return;
        }
        case Op::AvgPool: {
            if (!needs(r.a)) return;
            Matrix& gx = gr(r.a);
            for (Eigen::Index t = 0; t < g.cols(); ++t) {
                gx.col(2 * t) += 0.5 * g.col(t);
                gx.col(2 * t + 1) += 0.5 * g.col(t);
            }
            return;
        }
        case Op::UpsampleLinear: {
            if (!needs(r.a)) return;
            Matrix& gx = gr(r.a);
            const int L = static_cast<int>(gx.cols());
            for (int j = 0; j < r.out_len; ++j) {
                const int i0 = r.indices[static_cast<std::size_t>(j)];
                const int i1 = std::min(i0 + 1, L - 1);
                const double w = r.weights[j];
                if (w == 0.0) {
                    gx.col(i0) += g.col(j);
                } else {
                    gx.col(i0) += (1.0 - w) * g.col(j);
                    gx.col(i1) += w * g.col(j);
                }
            }
            return;
        }
        case Op::Concat: {
            const Eigen::Index ra = recs_[static_cast<std::size_t>(r.a)].value.rows();
            if (needs(r.a)) gr(r.a) += g.topRows(ra);
            if (needs(r.b)) gr(r.b) += g.bottomRows(g.rows() - ra);
            return;
        }
        case Op::PadEdgeCols: {
            if (!needs(r.a)) return;
            Matrix& gx = gr(r.a);
            const Eigen::Index L = gx.cols();
            gx += g.leftCols(L);
            for (Eigen::Index j = L; j < r.out_len; ++j) gx.col(L - 1) += g.col(j);
            return;
        }
        case Op::CropCols: {
            if (needs(r.a)) gr(r.a).leftCols(r.out_len) += g;
            return;
        }
        case Op::ZeroPadCols: {
            if (needs(r.a)) gr(r.a) += g.leftCols(gr(r.a).cols());
            return;
        }
        case Op::GatherCols: {
            if (!needs(r.a)) return;
            Matrix& gx = gr(r.a);
            for (std::size_t c = 0; c < r.indices.size(); ++c)
                gx.col(r.indices[c]) += g.col(static_cast<Eigen::Index>(c));
            return;
        }
        case Op::MirrorEven: {
            if (!needs(r.a)) return;
            Matrix& gx = gr(r.a);
            const int L = static_cast<int>(gx.cols());
            gx += g.leftCols(L);
            gx.col(L - 1) += g.col(L);
            for (int k = 1; k < L; ++k) gx.col(k) += g.col(2 * L - k);
            return;
        }
        case Op::ScaleCols: {
            if (needs(r.a)) gr(r.a).array() += g.array().rowwise() * r.weights.transpose().array();
            return;
        }
        case Op::ScaleRows: {
            if (needs(r.a)) gr(r.a).array() += g.array().colwise() * r.weights.array();
            return;
        }
        case Op::Add: {
            if (needs(r.a)) gr(r.a) += g;
            if (needs(r.b)) gr(r.b) += g;
            return;
        }
        case Op::Sub: {
            if (needs(r.a)) gr(r.a) += g;
            if (needs(r.b)) gr(r.b) -= g;
            return;
        }
        case Op::Scale: {
            if (needs(r.a)) gr(r.a) += r.scalar * g;
            return;
        }
        case Op::CDft: {
            // adjoint of the forward DFT is the unnormalized inverse kernel
            if (!needs(r.a)) return;
            Matrix tmp(g.rows(), g.cols());
            apply_pair_dft(g, tmp, r, +1, false);
            gr(r.a) += tmp;
            return;
        }
        case Op::CDftInverse: {
            // adjoint of the normalized inverse is the forward kernel / N
            if (!needs(r.a)) return;
            Matrix tmp(g.rows(), g.cols());
            apply_pair_dft(g, tmp, r, -1, true);
            gr(r.a) += tmp;
            return;
        }
        case Op::RfftPair: {
            if (!needs(r.a)) return;
            const int n = static_cast<int>(g.cols());
            Matrix& gx = gr(r.a);
            for (Eigen::Index ch = 0; ch < gx.rows(); ++ch) {
                for (int t = 0; t < n; ++t)
                    r.scratch_in[static_cast<std::size_t>(t)] = {g(2 * ch, t), g(2 * ch + 1, t)};
                fft::cdft(r.scratch_in.data(), r.scratch_out.data(), n, +1);
                for (int t = 0; t < n; ++t)
                    gx(ch, t) += r.scratch_out[static_cast<std::size_t>(t)].real();
            }
            return;
        }
        case Op::IrfftPair: {
            if (!needs(r.a)) return;
            const int n = static_cast<int>(g.cols());
            Matrix& gx = gr(r.a);
            for (Eigen::Index p = 0; p < g.rows(); ++p) {
                for (int t = 0; t < n; ++t)
                    r.scratch_in[static_cast<std::size_t>(t)] = {g(p, t), 0.0};
                fft::cdft(r.scratch_in.data(), r.scratch_out.data(), n, -1);
                for (int t = 0; t < n; ++t) {
                    gx(2 * p, t) += r.scratch_out[static_cast<std::size_t>(t)].real() / n;
                    gx(2 * p + 1, t) += r.scratch_out[static_cast<std::size_t>(t)].imag() / n;
                }
            }
            return;
        }
        case Op::ThirdDiff: {
            if (!needs(r.a)) return;
            Matrix& gx = gr(r.a);
            const Eigen::Index m = g.cols();
            gx.middleCols(3, m) += g;
            gx.middleCols(2, m) -= 3.0 * g;
            gx.middleCols(1, m) += 3.0 * g;
            gx.middleCols(0, m) -= g;
            return;
        }
        case Op::ComplexAbsSum: {
            if (!needs(r.a)) return;
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            Matrix& gx = gr(r.a);
            const double gs = g(0, 0);
            const Eigen::Index pairs = x.rows() / 2;
            for (Eigen::Index p = 0; p < pairs; ++p) {
                for (Eigen::Index t = 0; t < x.cols(); ++t) {
                    const double norm = r.aux(p, t);
                    if (norm > 0.0) {
                        gx(2 * p, t) += gs * x(2 * p, t) / norm;
                        gx(2 * p + 1, t) += gs * x(2 * p + 1, t) / norm;
                    }
                }
            }
            return;
        }
        case Op::SumSquares: {
            if (needs(r.a))
                gr(r.a) += 2.0 * g(0, 0) * recs_[static_cast<std::size_t>(r.a)].value;
            return;
        }
        case Op::SumAbs: {
            if (!needs(r.a)) return;
            const Matrix& x = recs_[static_cast<std::size_t>(r.a)].value;
            const double gs = g(0, 0);
            // subgradient with sign(0) = 0
            gr(r.a).array() += x.array().unaryExpr(
                [gs](double v) { return v > 0.0 ? gs : (v < 0.0 ? -gs : 0.0); });
            return;
        }
    }
}

}  // namespace spfit::ad
