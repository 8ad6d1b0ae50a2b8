#pragma once

// Helpers shared by the training and test-time adaptation loops.

#include "fieldmeta/eval.hpp"
#include "fieldmeta/metatrain.hpp"

#include <cmath>

namespace fieldmeta::meta::detail {

template <class Real>
using Matrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

template <class Real>
Matrix<Real> gather_rows(const Matrix<Real>& m, std::span<const std::uint32_t> rows) {
    Matrix<Real> out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
    return out;
}

template <class Real>
double grad_norm(graph::Tape<Real>& tape, std::span<const graph::NodeId> grads) {
    double sq = 0.0;
    for (const graph::NodeId g : grads) sq += tape.evaluate(g).template cast<double>().squaredNorm();
    return std::sqrt(sq);
}

template <class Real>
struct ContextArrays {
    Matrix<Real> features;
    Matrix<Real> targets;
};

template <class Real>
ContextArrays<Real> context_arrays(const nf::ModelSpec& spec, const signals::ContextSet& ctx) {
    if (ctx.size() == 0) throw std::invalid_argument("adaptation needs a non-empty context");
    if (ctx.output_dim() != spec.output_dim) {
        throw std::invalid_argument("context has " + std::to_string(ctx.output_dim()) + " value channels, model has " +
                                    std::to_string(spec.output_dim));
    }
    return {nf::input_features(spec, ctx.coords).cast<Real>(), ctx.values.cast<Real>()};
}

// Full-context loss and PSNR of a forward pass.
template <class Real>
void record_fit(StepRecord& rec, const nf::ForwardResult<Real>& fwd, const Matrix<Real>& targets) {
    const double sq = (targets - fwd.outputs).template cast<double>().squaredNorm();
    rec.loss = sq / static_cast<double>(targets.rows());
    rec.psnr = eval::psnr_from_mse(sq / static_cast<double>(targets.size()));
}

}  // namespace fieldmeta::meta::detail
