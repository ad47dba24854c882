#pragma once

#include <cstdint>
#include <vector>

#include "perstd/tensor.hpp"

namespace perstd {

struct CpdOptions {
  Index rank = 1;
  int max_iters = 1000;
  // Stop once the relative reconstruction error changes by less than
  // tol * (previous error) between sweeps.
  double tol = 1e-9;
  int restarts = 1;
  // Restart r draws its Gaussian initial factors from seed + r.
  std::uint64_t seed = 0;
  // Extrapolate each sweep's step by (iteration)^(1/3), accepting the jump
  // only when it lowers the residual. Guards against swamping.
  bool line_search = true;
  // Levenberg-Marquardt iterations applied to the winning restart; 0 skips
  // the polish.
  int polish_iters = 200;
  // How many of the best restarts get polished (stopping early once one
  // fits exactly). ALS ranking is a poor predictor of which restart LM can
  // finish, so this is deliberately generous.
  int polish_candidates = 10;
};

struct CpdResult {
  CpdFactors factors;
  // ||t - [[A,B,C]]||_F / ||t||_F of the selected restart.
  double rel_error = 0.0;
  int iterations = 0;
  bool converged = false;
  int best_restart = 0;
  // Squared residual after each sweep of the selected restart.
  std::vector<double> trace;
};

// Multi-start ALS. After each sweep the columns of the mode-1 and mode-2
// factors are scaled to unit norm and the scales moved into mode 3. The
// best few restarts are then polished, and the lowest residual wins; ties go
// to the lowest restart index. A restart whose ALS residual is already tiny
// is polished on the spot, and if that reaches an exact fit the remaining
// restarts are skipped.
// Throws std::invalid_argument for rank < 1 or restarts < 1.
CpdResult cpd_als(const Tensor3& t, const CpdOptions& opts);

// Single ALS run from the given factors. opts.restarts and opts.seed are
// ignored.
CpdResult cpd_als_from(const Tensor3& t, CpdFactors init,
                       const CpdOptions& opts);

// Levenberg-Marquardt refinement of a CPD, using the Gauss-Newton normal
// matrix assembled from Gram matrices instead of an explicit Jacobian.
// Never returns a worse fit than its input.
CpdResult cpd_lm_polish(const Tensor3& t, CpdFactors init, int max_iters,
                        double tol);

// Unit-norm columns in modes 1 and 2, scales absorbed by mode 3.
void normalize_columns(CpdFactors& f);

// Factor match score in [0, 1]: the best one-to-one column matching of
//   (1 - |w_r - w'_s| / max(w_r, w'_s)) * prod_j |cos(f_j[:,r], g_j[:,s])|
// averaged over columns, where w_r is the product of column norms of
// component r. Equals 1 exactly when g is f up to column permutation and
// per-mode scalings whose product has unit magnitude.
double factor_match_score(const CpdFactors& f, const CpdFactors& g);

}  // namespace perstd
