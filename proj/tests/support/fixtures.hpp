#pragma once

#include <string>
#include <vector>

#include "gumbelcf/mdp.hpp"
#include "oracles.hpp"

namespace fixtures {

/// Small MDP in both library and dense oracle form.
struct SmallMdp {
  gumbelcf::FiniteMDP mdp{1, 1};
  oracle::Tensor P;
  std::vector<oracle::Vec> r;
  oracle::Vec entry;
  std::vector<bool> absorbing;
  oracle::Vec init;
};

inline SmallMdp build(const oracle::Tensor& P, const std::vector<oracle::Vec>& r,
                      const oracle::Vec& entry, const std::vector<bool>& absorbing,
                      const oracle::Vec& init) {
  SmallMdp out{gumbelcf::FiniteMDP(P.size(), P[0].size()), P, r, entry, absorbing, init};
  for (std::size_t s = 0; s < P.size(); ++s) {
    for (std::size_t a = 0; a < P[s].size(); ++a) {
      gumbelcf::SparseRow row;
      for (std::size_t t = 0; t < P[s][a].size(); ++t)
        if (P[s][a][t] > 0) row.emplace_back(t, P[s][a][t]);
      out.mdp.set_row(s, a, row);
      out.mdp.set_reward(s, a, r[s][a]);
    }
    out.mdp.set_entry_reward(s, entry[s]);
    if (absorbing[s]) out.mdp.make_absorbing(s);
  }
  out.mdp.set_initial(gumbelcf::CategoricalParams(init));
  return out;
}

/// Three states, two actions, no absorbing states; entering state 1 pays +1,
/// entering state 2 pays -1, and action 1 earns an extra 0.1.
inline SmallMdp three_state() {
  const oracle::Tensor P = {{{0.2, 0.5, 0.3}, {0.6, 0.1, 0.3}},
                            {{0.3, 0.3, 0.4}, {0.1, 0.7, 0.2}},
                            {{0.5, 0.25, 0.25}, {0.2, 0.2, 0.6}}};
  const std::vector<oracle::Vec> r = {{0.0, 0.1}, {0.0, 0.1}, {0.0, 0.1}};
  return build(P, r, {0.0, 1.0, -1.0}, {false, false, false}, {0.5, 0.3, 0.2});
}

/// Two live states plus death (2) and discharge (3).
inline SmallMdp clinic() {
  const oracle::Tensor P = {{{0.5, 0.2, 0.1, 0.2}, {0.1, 0.3, 0.4, 0.2}},
                            {{0.2, 0.3, 0.1, 0.4}, {0.4, 0.1, 0.3, 0.2}},
                            {{0, 0, 1, 0}, {0, 0, 1, 0}},
                            {{0, 0, 0, 1}, {0, 0, 0, 1}}};
  const std::vector<oracle::Vec> r(4, oracle::Vec(2, 0.0));
  auto m = build(P, r, {0.0, 0.0, -1.0, 1.0}, {false, false, true, true}, {0.6, 0.4, 0.0, 0.0});
  m.mdp.set_death_state(2);
  m.mdp.set_discharge_state(3);
  return m;
}

inline std::vector<oracle::Vec> rows_of(const gumbelcf::PolicyTable& pi) {
  std::vector<oracle::Vec> out;
  for (std::size_t s = 0; s < pi.n_states(); ++s) {
    const auto p = pi.row(s).probs();
    out.emplace_back(p.begin(), p.end());
  }
  return out;
}

}  // namespace fixtures
