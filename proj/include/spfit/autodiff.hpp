#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace spfit::ad {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Handle to a node on a Tape.
struct Node {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense real channel matrices (rows = channels,
/// cols = samples). Nodes are appended in topological order; forward()
/// re-evaluates the whole graph in place, backward(root) accumulates
/// gradients for every parameter leaf in fixed reverse order. A tape is
/// confined to a single fit; it is not shared between threads.
class Tape {
public:
    // -- leaves ---------------------------------------------------------
    Node input(int rows, int cols);
    Node constant(Matrix value);
    Node param(Matrix value);

    // -- network ops ----------------------------------------------------
    /// Kernel-3, stride-1, zero-padded cross-correlation.
    /// w is c_out x (3*c_in) laid out as [W0 | W1 | W2]; b is c_out x 1.
    Node conv1d(Node x, Node w, Node b);
    /// Per-channel normalization over the length axis of this instance.
    Node batchnorm(Node x, Node gamma, Node beta, double eps = 1e-5);
    Node leaky_relu(Node x, double slope = 0.01);
    Node avg_pool(Node x);
    Node upsample_linear(Node x, int out_len);
    Node concat(Node a, Node b);

    // -- structural / linear ops ----------------------------------------
    Node pad_edge_cols(Node x, int out_len);  // replicate the last column
    Node crop_cols(Node x, int out_len);      // keep the first out_len columns
    Node zero_pad_cols(Node x, int out_len);
    Node gather_cols(Node x, std::vector<int> indices);
    Node mirror_even(Node x);                 // length L -> 2L even extension
    Node scale_cols(Node x, Vector weights);
    Node scale_rows(Node x, Vector weights);
    Node add(Node a, Node b);
    Node sub(Node a, Node b);
    Node scale(Node x, double factor);

    // -- spectral ops on (real, imag) channel pairs ----------------------
    /// Complex DFT per channel pair; inverse applies the 1/N scale.
    Node cdft(Node x, bool inverse);
    /// Real channels -> interleaved (re, im) spectrum pairs.
    Node rfft_pair(Node x);
    /// Interleaved (re, im) pairs -> real part of the inverse DFT.
    Node irfft_pair(Node x);

    // -- reductions -------------------------------------------------------
    Node third_diff(Node x);       // r x L -> r x (L-3) stencil along columns
    Node complex_abs_sum(Node x);  // sum over channel pairs of sqrt(re^2+im^2)
    Node sum_squares(Node x);
    Node sum_abs(Node x);

    // -- execution --------------------------------------------------------
    void set_value(Node leaf, const Matrix& v);
    Matrix& value(Node n);
    const Matrix& value(Node n) const;
    void forward();
    void backward(Node root);
    const Matrix& grad(Node n) const;
    bool requires_grad(Node n) const;

    int node_count() const { return static_cast<int>(recs_.size()); }
    int rows(Node n) const;
    int cols(Node n) const;

private:
    enum class Op {
        Input, Constant, Param,
        Conv1d, BatchNorm, LeakyRelu, AvgPool, UpsampleLinear, Concat,
        PadEdgeCols, CropCols, ZeroPadCols, GatherCols, MirrorEven,
        ScaleCols, ScaleRows, Add, Sub, Scale,
        CDft, CDftInverse, RfftPair, IrfftPair,
        ThirdDiff, ComplexAbsSum, SumSquares, SumAbs,
    };

    struct Rec {
        Op op;
        int a = -1, b = -1, c = -1;  // input node ids
        Matrix value;
        bool needs_grad = false;

        // op parameters
        double scalar = 0.0;          // slope / scale factor / eps
        int out_len = 0;
        std::vector<int> indices;     // gather indices or upsample i0
        Vector weights;               // scale_cols/rows or upsample fractions

        // cached forward state for backward
        Matrix aux;                   // conv: padded input; bn: xhat; cas: norms
        Vector aux_vec;               // bn: inv_std
        std::vector<std::complex<double>> scratch_in, scratch_out;
    };

    Node push(Rec rec);
    const Rec& at(Node n) const;
    void eval(Rec& r);
    void adjoint(int id);
    void check_finite(const Rec& r, int id) const;
    static const char* op_name(Op op);

    void apply_pair_dft(const Matrix& in, Matrix& out, Rec& r, int sign, bool normalize);

    std::vector<Rec> recs_;
    std::vector<Matrix> grads_;
};

}  // namespace spfit::ad
