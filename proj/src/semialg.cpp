#include "perstd/semialg.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>

#include "perstd/numerics.hpp"
#include "perstd/rng.hpp"

namespace perstd {

namespace {

int pivot_of(const Witness& w) {
  for (int j = 0; j < 3; ++j) {
    if (w.xi[j] != w.eta) return j;
  }
  throw std::invalid_argument(
      "witness needs at least one mode-unique dataset different from eta");
}

Matrix select_columns(const Matrix& m, const std::vector<Index>& cols) {
  Matrix out(m.rows(), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < cols.size(); ++i) out.col(i) = m.col(cols[i]);
  return out;
}

// |cos| between every column of u and every column of v.
Matrix similarity(const Matrix& u, const Matrix& v) {
  const Vector nu = u.colwise().norm().transpose();
  const Vector nv = v.colwise().norm().transpose();
  Matrix z = (u.transpose() * v).cwiseAbs();
  for (Index n = 0; n < z.rows(); ++n) {
    for (Index m = 0; m < z.cols(); ++m) {
      const double d = nu[n] * nv[m];
      z(n, m) = d > 0.0 ? z(n, m) / d : 0.0;
    }
  }
  return z;
}

// Per-column least squares of x against p: lambda_r = <p_r, x_r> / |p_r|^2.
Vector column_scales(const Matrix& p, const Matrix& x, int mode,
                     std::vector<std::string>& warnings) {
  Vector lambda(p.cols());
  for (Index r = 0; r < p.cols(); ++r) {
    const double pp = p.col(r).squaredNorm();
    if (std::sqrt(pp) < 1e-12) {
      lambda[r] = 0.0;
      warnings.push_back("mode " + std::to_string(mode + 1) + " column " +
                         std::to_string(r + 1) +
                         ": mapped column is numerically zero, scale set to 0");
    } else {
      lambda[r] = p.col(r).dot(x.col(r)) / pp;
    }
  }
  return lambda;
}

void require_left_invertible(const MeasurementModel& meas, Index k, int j) {
  const Matrix& p = meas[k][j];
  if (numeric_rank(p) != p.cols()) {
    throw std::invalid_argument(
        "P(" + std::to_string(k + 1) + "," + std::to_string(j + 1) +
        ") is not left-invertible (rank " + std::to_string(numeric_rank(p)) +
        " < " + std::to_string(p.cols()) + ")");
  }
}

const CpdFactors& cpd_for(const std::map<Index, CpdFactors>& cpds, Index k,
                          Index width) {
  auto it = cpds.find(k);
  if (it == cpds.end()) {
    throw std::invalid_argument("missing CPD for dataset " +
                                std::to_string(k + 1));
  }
  if (it->second.rank() != width) {
    throw std::invalid_argument("CPD of dataset " + std::to_string(k + 1) +
                                " has rank " +
                                std::to_string(it->second.rank()) +
                                ", expected " + std::to_string(width));
  }
  return it->second;
}

}  // namespace

std::vector<Index> semialg_required_datasets(const Witness& w) {
  const int j = pivot_of(w);
  std::set<Index> need{w.eta, w.xi[j]};
  for (int l = 0; l < 3; ++l) {
    if (l != j && w.xi[l] != w.eta && w.xi[l] != w.xi[j]) need.insert(w.xi[l]);
  }
  return {need.begin(), need.end()};
}

SemiAlgResult semialg_assemble(const std::vector<Tensor3>& y,
                               const MeasurementModel& meas, Index R,
                               const std::vector<Index>& L, const Witness& w,
                               const std::map<Index, CpdFactors>& cpds,
                               const SemiAlgOptions& opts) {
  meas.validate();
  const Index K = static_cast<Index>(meas.size());
  if (static_cast<Index>(y.size()) != K || static_cast<Index>(L.size()) != K) {
    throw std::invalid_argument("Y, L and measurements disagree on K");
  }
  if (R < 1) throw std::invalid_argument("common rank R must be >= 1");
  for (Index k : {w.eta, w.xi[0], w.xi[1], w.xi[2]}) {
    if (k < 0 || k >= K) {
      throw std::invalid_argument("witness index out of range");
    }
  }
  const int j = pivot_of(w);
  for (int l = 0; l < 3; ++l) require_left_invertible(meas, w.xi[l], l);

  SemiAlgResult out;
  out.pivot_mode = j + 1;

  const Index eta = w.eta, xij = w.xi[j];
  const CpdFactors& u_eta = cpd_for(cpds, eta, R + L[eta]);
  const CpdFactors& u_xi = cpd_for(cpds, xij, R + L[xij]);

  // Initial match on the pivot mode.
  const Matrix map_j = meas[eta][j] * pinv(meas[xij][j]);
  const Matrix z = similarity(u_eta[j], map_j * u_xi[j]);
  if (R > std::min(z.rows(), z.cols())) {
    throw std::invalid_argument("R exceeds the number of CPD columns");
  }
  const AssignmentResult match = assign_fixed_cardinality(z, R);
  out.match_scores[j] = match.objective;
  std::vector<Index> rows, cols;
  for (const auto& [r, c] : match.pairs) {
    rows.push_back(r);
    cols.push_back(c);
  }
  std::array<Matrix, 3> xc_eta, xc_xi;
  for (int i = 0; i < 3; ++i) {
    xc_eta[i] = select_columns(u_eta[i], rows);
    xc_xi[i] = select_columns(u_xi[i], cols);
  }

  std::array<Matrix, 3> c_hat;
  // Common factor for mode l from source columns already aligned with
  // xc_eta[l]: fit the scaling after mapping through P_{eta,l} P_{src,l}^+.
  auto finish = [&](int l, Index src_k, const Matrix& src) {
    const Matrix p_src_inv = pinv(meas[src_k][l]);
    const Matrix mapped = meas[eta][l] * p_src_inv * src;
    out.scalings[l] = column_scales(mapped, xc_eta[l], l, out.warnings);
    c_hat[l] = p_src_inv * src * out.scalings[l].asDiagonal();
  };

  finish(j, xij, xc_xi[j]);
  for (int l = 0; l < 3; ++l) {
    if (l == j) continue;
    const Index xl = w.xi[l];
    if (xl == eta) {
      finish(l, eta, xc_eta[l]);
    } else if (xl == xij) {
      finish(l, xij, xc_xi[l]);
    } else {
      // Fresh dataset: match its mode-l columns against the already aligned
      // reference xc_eta[l] in the column space of P_{eta,l}.
      const CpdFactors& u_l = cpd_for(cpds, xl, R + L[xl]);
      const Matrix map_l = meas[eta][l] * pinv(meas[xl][l]);
      const Matrix zl = similarity(xc_eta[l], map_l * u_l[l]);
      if (R > zl.cols()) {
        throw std::invalid_argument("R exceeds the number of CPD columns");
      }
      const AssignmentResult ml = assign_fixed_cardinality(zl, R);
      out.match_scores[l] = ml.objective;
      std::vector<Index> cl;
      for (const auto& pr : ml.pairs) cl.push_back(pr.second);
      finish(l, xl, select_columns(u_l[l], cl));
    }
  }
  out.common = CpdFactors(c_hat[0], c_hat[1], c_hat[2]);

  const Tensor3 c_tensor = cp_reconstruct(out.common);
  for (Index k = 0; k < K; ++k) {
    out.distinct.push_back(y[k] - apply_measurement(c_tensor, meas[k]));
  }
  if (opts.distinct_cpd) {
    for (Index k = 0; k < K; ++k) {
      const Dims d = out.distinct[k].dims();
      if (L[k] == 0) {
        out.distinct_factors.emplace_back(Matrix(d[0], 0), Matrix(d[1], 0),
                                          Matrix(d[2], 0));
        continue;
      }
      CpdOptions co = opts.cpd;
      co.rank = L[k];
      co.seed = derive_seed(opts.cpd.seed, 1000 + k);
      out.distinct_factors.push_back(cpd_als(out.distinct[k], co).factors);
    }
  }
  return out;
}

SemiAlgResult semialg_decompose(const std::vector<Tensor3>& y,
                                const MeasurementModel& meas, Index R,
                                const std::vector<Index>& L, const Witness& w,
                                const SemiAlgOptions& opts) {
  if (y.size() != meas.size() || L.size() != meas.size()) {
    throw std::invalid_argument("Y, L and measurements disagree on K");
  }
  std::map<Index, CpdFactors> factors;
  std::map<Index, CpdResult> results;
  for (Index k : semialg_required_datasets(w)) {
    if (k < 0 || k >= static_cast<Index>(y.size())) {
      throw std::invalid_argument("witness index out of range");
    }
    CpdOptions co = opts.cpd;
    co.rank = R + L[k];
    co.seed = derive_seed(opts.cpd.seed, k);
    CpdResult res = cpd_als(y[k], co);
    factors.emplace(k, res.factors);
    results.emplace(k, std::move(res));
  }
  SemiAlgResult out = semialg_assemble(y, meas, R, L, w, factors, opts);
  out.cpds = std::move(results);
  return out;
}

RegressionResult hybrid_regression_mode3(const Tensor3& y1,
                                         const MeasurementOps& p1,
                                         const Matrix& c1, const Matrix& c2) {
  if (c1.cols() != c2.cols()) {
    throw std::invalid_argument("C1 and C2 must share a column count");
  }
  const Matrix a = p1[0] * c1;
  const Matrix b = p1[1] * c2;
  if (a.rows() != y1.dim(1) || b.rows() != y1.dim(2) ||
      p1[2].rows() != y1.dim(3)) {
    throw std::invalid_argument("operators do not match the tensor dims");
  }
  const Matrix k = khatri_rao(b, a);
  RegressionResult out;
  out.rank_deficient = numeric_rank(k) < k.cols();
  // unfold3(Y) = K * X^T with X = P_{1,3} C3.
  const Matrix x = (pinv(k) * unfold(y1, 3)).transpose();
  out.c3 = pinv(p1[2]) * x;
  return out;
}

}  // namespace perstd
