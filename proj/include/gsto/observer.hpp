#pragma once

// Generalized super-twisting observer for the interconnected plant class:
//
//   xhat_i1' = -gamma_i l_i1 g_i(y) phi_i1(e_i1) + f_i1(y, u, xhat_12..xhat_(i-1)2) + g_i(y) xhat_i2
//   xhat_i2' = -gamma_i^2 l_i2 g_i(y) phi_i2(e_i1) + f_i2(xhat, u)
//
// with e_i1 = xhat_i1 - y_i. Setting mu_i1 = 0 yields the continuous
// high-gain observer.

#include <string>
#include <utility>
#include <vector>

#include "gsto/errors.hpp"
#include "gsto/sta_core.hpp"
#include "gsto/system_model.hpp"

namespace gsto {

struct SubsystemGains {
  double l1 = 0.0;
  double l2 = 0.0;
  double gamma = 0.0;
  MuPair mu;
};

struct ObserverGains {
  std::vector<SubsystemGains> sub;

  std::size_t size() const noexcept { return sub.size(); }

  /// Same gains with the square-root terms removed.
  ObserverGains as_hgo() const {
    ObserverGains g = *this;
    for (auto& s : g.sub) s.mu.mu1 = 0.0;
    return g;
  }

  GainPrerequisites prerequisites() const {
    GainPrerequisites p;
    for (const auto& s : sub) {
      p.l1.push_back(s.l1);
      p.l2.push_back(s.l2);
      p.gamma.push_back(s.gamma);
    }
    return p;
  }
};

enum class ObserverMode { GSTO, HGO };

inline const char* to_string(ObserverMode m) { return m == ObserverMode::GSTO ? "gsto" : "hgo"; }

/// Observer right-hand side generator. Holds only the known model; it has no
/// access to the perturbations delta_i or the unknown input w.
class ObserverPlant {
 public:
  ObserverPlant(KnownModel model, ObserverGains gains) : model_(std::move(model)), gains_(std::move(gains)) {
    if (gains_.size() != model_.size()) {
      throw DomainError("observer gains given for " + std::to_string(gains_.size()) + " subsystems, model has " +
                        std::to_string(model_.size()));
    }
    std::size_t hgo = 0;
    for (std::size_t i = 0; i < gains_.size(); ++i) {
      const auto& g = gains_.sub[i];
      validate(g.mu);
      if (!(g.l1 > 0.0) || !(g.l2 > 0.0) || !(g.gamma > 0.0)) {
        throw DomainError("subsystem " + std::to_string(i + 1) + ": observer needs l1, l2, gamma > 0");
      }
      hgo += g.mu.is_hgo() ? 1 : 0;
    }
    if (hgo != 0 && hgo != gains_.size()) {
      throw DomainError("mu1 must be zero for every subsystem (HGO) or positive for every subsystem (GSTO)");
    }
    mode_ = hgo == 0 ? ObserverMode::GSTO : ObserverMode::HGO;
  }

  const KnownModel& model() const noexcept { return model_; }
  const ObserverGains& gains() const noexcept { return gains_; }
  ObserverMode mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return model_.size(); }

 private:
  KnownModel model_;
  ObserverGains gains_;
  ObserverMode mode_ = ObserverMode::GSTO;
};

/// Observer for `sys` built from its known parts only.
inline ObserverPlant make_observer(const InterconnectedSystem& sys, ObserverGains gains) {
  return ObserverPlant(sys.known(), std::move(gains));
}

/// `y` is the delivered (possibly noisy) measurement.
inline Vec eval_observer_rhs(const ObserverPlant& obs, const Vec& xhat, const Vec& y, const Vec& u, double t) {
  const auto& km = obs.model();
  km.check_state(xhat);
  km.check_output(y);
  km.check_input(u);
  const auto xh2 = second_channels(xhat);
  Vec dx(xhat.size());
  for (std::size_t i = 0; i < km.size(); ++i) {
    const auto& gn = obs.gains().sub[i];
    const auto k = static_cast<Eigen::Index>(2 * i);
    const double gi = km.g(i, y, u, t);
    const double e1 = xhat[k] - y[static_cast<Eigen::Index>(i)];
    dx[k] = -gn.gamma * gn.l1 * gi * phi1(e1, gn.mu) + km.f1(i, y, u, xh2, t) + gi * xh2[i];
    dx[k + 1] = -gn.gamma * gn.gamma * gn.l2 * gi * phi2(e1, gn.mu) + km.f2(i, xhat, u, t);
  }
  detail::require_finite_vec(dx, "observer rhs");
  return dx;
}

struct InterconnectionResiduals {
  Vec rho1;  // f_i1 mismatch from upstream second-state errors; rho_11 == 0
  Vec rho2;  // f_i2 mismatch minus delta_i
};

/// rho terms of the error dynamics, evaluated with the clean output y = C x.
inline InterconnectionResiduals interconnection_residuals(const InterconnectedSystem& sys, const Vec& x,
                                                          const Vec& xhat, const Vec& u, const Vec& w, double t) {
  const auto& km = sys.known();
  km.check_state(x);
  km.check_state(xhat);
  const Vec y = measured(x);
  const auto x2 = second_channels(x);
  const auto xh2 = second_channels(xhat);
  const auto n = static_cast<Eigen::Index>(sys.size());
  InterconnectionResiduals r{Vec::Zero(n), Vec::Zero(n)};
  for (std::size_t i = 0; i < sys.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (i > 0) r.rho1[k] = km.f1(i, y, u, xh2, t) - km.f1(i, y, u, x2, t);
    r.rho2[k] = km.f2(i, xhat, u, t) - km.f2(i, x, u, t) - sys.delta(i, x, u, w, t);
  }
  return r;
}

/// Estimation error dynamics e' written in injection + rho form.
/// Agrees with eval_observer_rhs(xhat, Cx) - eval_plant_rhs(x) up to rounding.
inline Vec eval_error_rhs(const InterconnectedSystem& sys, const ObserverPlant& obs, const Vec& x, const Vec& xhat,
                          const Vec& u, const Vec& w, double t) {
  const auto& km = obs.model();
  const Vec y = measured(x);
  const auto rho = interconnection_residuals(sys, x, xhat, u, w, t);
  Vec de(x.size());
  for (std::size_t i = 0; i < km.size(); ++i) {
    const auto& gn = obs.gains().sub[i];
    const auto k = static_cast<Eigen::Index>(2 * i);
    const auto ki = static_cast<Eigen::Index>(i);
    const double gi = km.g(i, y, u, t);
    const double e1 = xhat[k] - x[k];
    const double e2 = xhat[k + 1] - x[k + 1];
    de[k] = -gn.gamma * gn.l1 * gi * phi1(e1, gn.mu) + gi * e2 + rho.rho1[ki];
    de[k + 1] = -gn.gamma * gn.gamma * gn.l2 * gi * phi2(e1, gn.mu) + rho.rho2[ki];
  }
  detail::require_finite_vec(de, "error rhs");
  return de;
}

}  // namespace gsto
