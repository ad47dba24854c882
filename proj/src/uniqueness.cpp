#include "perstd/uniqueness.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <string>

#include "perstd/numerics.hpp"

namespace perstd {

namespace {

std::string at(Index k, int j) {
  return "(" + std::to_string(k + 1) + "," + std::to_string(j + 1) + ")";
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

}  // namespace

void ProblemDims::validate() const {
  const auto k = datasets.size();
  if (k == 0) throw std::invalid_argument("problem has no datasets");
  if (p_rank.size() != k || p_full_col.size() != k || L.size() != k) {
    throw std::invalid_argument("per-dataset arrays must all have K entries");
  }
  if (R < 1) throw std::invalid_argument("common rank R must be >= 1");
  for (int j = 0; j < 3; ++j) {
    if (common[j] < 1) throw std::invalid_argument("common dims must be >= 1");
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (L[i] < 0) throw std::invalid_argument("distinct ranks must be >= 0");
    for (int j = 0; j < 3; ++j) {
      const Index n = datasets[i][j];
      if (n < 1) throw std::invalid_argument("dataset dims must be >= 1");
      const Index cap = std::min(n, common[j]);
      if (p_rank[i][j] < 0 || p_rank[i][j] > cap) {
        throw std::invalid_argument("rank of P" + at(i, j) + " = " +
                                    std::to_string(p_rank[i][j]) +
                                    " exceeds min(N, M) = " +
                                    std::to_string(cap));
      }
      if (p_full_col[i][j] && p_rank[i][j] != common[j]) {
        throw std::invalid_argument("P" + at(i, j) +
                                    " flagged full column rank but rank < M");
      }
    }
  }
}

ProblemDims ProblemDims::from_measurements(const MeasurementModel& meas,
                                           Index R, std::vector<Index> L) {
  meas.validate();
  ProblemDims d;
  d.common = meas.common_dims();
  d.R = R;
  d.L = std::move(L);
  for (std::size_t k = 0; k < meas.size(); ++k) {
    d.datasets.push_back(meas.dataset_dims(k));
    std::array<Index, 3> ranks{};
    std::array<bool, 3> full{};
    for (int j = 0; j < 3; ++j) {
      ranks[j] = numeric_rank(meas[k][j]);
      full[j] = ranks[j] == d.common[j];
    }
    d.p_rank.push_back(ranks);
    d.p_full_col.push_back(full);
  }
  d.validate();
  return d;
}

ProblemDims ProblemDims::full_rank(const Dims& common,
                                   std::vector<Dims> datasets, Index R,
                                   std::vector<Index> L) {
  ProblemDims d;
  d.common = common;
  d.R = R;
  d.L = std::move(L);
  for (const Dims& n : datasets) {
    std::array<Index, 3> ranks{};
    std::array<bool, 3> full{};
    for (int j = 0; j < 3; ++j) {
      ranks[j] = std::min(n[j], common[j]);
      full[j] = n[j] >= common[j];
    }
    d.p_rank.push_back(ranks);
    d.p_full_col.push_back(full);
  }
  d.datasets = std::move(datasets);
  d.validate();
  return d;
}

Index uniqueness_bound(const ProblemDims& d, Index k) {
  return 2 * (d.R + d.L[k]) + 2;
}

Index full_uniqueness_count(const ProblemDims& d, Index k) {
  const Index width = d.R + d.L[k];
  Index sum = 0;
  for (int j = 0; j < 3; ++j) sum += std::min(d.p_rank[k][j], width);
  return sum;
}

Index unimode_count(const ProblemDims& d, Index k, int j) {
  const Index width = d.R + d.L[k];
  Index sum = std::min(d.datasets[k][j], std::min(d.common[j], d.R) + d.L[k]);
  for (int i = 0; i < 3; ++i) {
    if (i != j) sum += std::min(d.p_rank[k][i], width);
  }
  return sum;
}

UniquenessReport check_generic(const ProblemDims& d) {
  d.validate();
  UniquenessReport rep;
  for (Index k = 0; k < d.K(); ++k) {
    const Index bound = uniqueness_bound(d, k);
    const Index width = d.R + d.L[k];
    if (full_uniqueness_count(d, k) >= bound) rep.eta_candidates.push_back(k);
    for (int j = 0; j < 3; ++j) {
      if (!d.p_full_col[k][j]) continue;
      if (unimode_count(d, k, j) >= bound) {
        rep.unimode_candidates[j].push_back(k);
      }
      const Index rank_j =
          std::min(d.datasets[k][j], std::min(d.common[j], d.R) + d.L[k]);
      Index kr_min = width;
      for (int i = 0; i < 3; ++i) {
        if (i != j) kr_min = std::min(kr_min, std::min(d.p_rank[k][i], width));
      }
      if (rank_j + kr_min >= width + 1) {
        rep.alt_unimode_candidates[j].push_back(k);
      }
    }
  }

  auto total_dims = [&](Index k) {
    return d.datasets[k][0] + d.datasets[k][1] + d.datasets[k][2];
  };
  std::optional<Witness> best;
  std::size_t best_card = 0;
  Index best_size = 0;
  for (Index eta : rep.eta_candidates) {
    for (Index x1 : rep.unimode_candidates[0]) {
      for (Index x2 : rep.unimode_candidates[1]) {
        for (Index x3 : rep.unimode_candidates[2]) {
          if (x1 == eta && x2 == eta && x3 == eta) continue;
          const std::set<Index> used{eta, x1, x2, x3};
          Index size = 0;
          for (Index k : used) size += total_dims(k);
          // Enumeration is lexicographic, so strict improvement keeps the
          // lexicographically smallest among ties.
          if (!best || used.size() < best_card ||
              (used.size() == best_card && size > best_size)) {
            best = Witness{eta, {x1, x2, x3}};
            best_card = used.size();
            best_size = size;
          }
        }
      }
    }
  }
  rep.witness = best;
  rep.a6_satisfied = best.has_value();
  rep.overall = !rep.eta_candidates.empty() &&
                !rep.unimode_candidates[0].empty() &&
                !rep.unimode_candidates[1].empty() &&
                !rep.unimode_candidates[2].empty() && rep.a6_satisfied;
  return rep;
}

DeterministicReport check_deterministic(const CoupledModel& model,
                                        const MeasurementModel& meas,
                                        const Witness& w) {
  meas.validate();
  const Index K = static_cast<Index>(meas.size());
  if (static_cast<Index>(model.distinct.size()) != K) {
    throw std::invalid_argument("model and measurements disagree on K");
  }
  auto check_index = [&](Index k) {
    if (k < 0 || k >= K) {
      throw std::invalid_argument("witness index " + std::to_string(k + 1) +
                                  " out of range");
    }
  };
  check_index(w.eta);
  for (Index x : w.xi) check_index(x);

  const Index R = model.common.rank();
  auto stacked = [&](Index k, int j) {
    return hstack(meas[k][j] * model.common[j], model.distinct[k][j]);
  };

  DeterministicReport rep;
  {
    const Index width = R + model.distinct[w.eta].rank();
    rep.a1_bound = 2 * width + 2;
    for (int j = 0; j < 3; ++j) rep.a1_sum += kruskal_rank(stacked(w.eta, j));
    rep.a1 = rep.a1_sum >= rep.a1_bound;
  }

  for (int j = 0; j < 3; ++j) {
    const Index k = w.xi[j];
    const Index width = R + model.distinct[k].rank();
    const Matrix own = stacked(k, j);
    std::array<Index, 2> kr{};
    int p = 0;
    for (int i = 0; i < 3; ++i) {
      if (i != j) kr[p++] = kruskal_rank(stacked(k, i));
    }
    const Index rank_own = numeric_rank(own);
    const bool full_col = numeric_rank(meas[k][j]) == meas[k][j].cols();
    const bool nonzero = !has_zero_column(own);
    rep.a2[j] = full_col && nonzero &&
                kr[0] + kr[1] + rank_own >= 2 * width + 2;
    rep.a2_alt[j] =
        full_col && nonzero && rank_own + std::min(kr[0], kr[1]) >= width + 1;
  }

  bool any_a3 = false, all_a3 = true;
  for (int j = 0; j < 3; ++j) {
    if (w.xi[j] == w.eta) continue;
    const Index xi = w.xi[j];
    const Matrix& p_eta = meas[w.eta][j];
    const Matrix mixed = p_eta * pinv(meas[xi][j]) * model.distinct[xi][j];
    Matrix cat(p_eta.rows(), R + mixed.cols() + model.distinct[w.eta][j].cols());
    cat << p_eta * model.common[j], mixed, model.distinct[w.eta][j];
    const bool ok = kruskal_rank(cat) > 1;
    rep.a3[j] = ok;
    any_a3 = true;
    all_a3 = all_a3 && ok;
  }
  rep.overall = rep.a1 && rep.a2[0] && rep.a2[1] && rep.a2[2] && any_a3 &&
                all_a3;
  return rep;
}

}  // namespace perstd
