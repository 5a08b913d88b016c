#pragma once

#include "jumpstab/linalg.hpp"
#include "jumpstab/model.hpp"
#include "jumpstab/riccati.hpp"
#include "jumpstab/simulate.hpp"

namespace jumpstab {

// F_ik = D_ik^{-1} B_i^T G_ik, one entry per interval of G.
FeedbackLaw synthesize_feedback(const GainSet& G, const RegimeSystem& system,
                                const CostWeights& weights);

// Copy of the system with A_i replaced by A_i - B_i F_ik and B zeroed. The
// law is evaluated at interval k.
RegimeSystem closed_loop(const RegimeSystem& system, const FeedbackLaw& law, int k = 0);

// x^T G_ik x
double lyapunov_value(const GainSet& G, int i, int k, const Vector& x);

}  // namespace jumpstab
