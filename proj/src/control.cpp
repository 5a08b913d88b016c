#include "jumpstab/control.hpp"

#include <string>

#include "jumpstab/error.hpp"

namespace jumpstab {

FeedbackLaw synthesize_feedback(const GainSet& G, const RegimeSystem& sys, const CostWeights& w) {
    if (G.regimes() != sys.regime_count())
        throw DimensionError("G", "expected " + std::to_string(sys.regime_count()) + " regimes");
    FeedbackLaw law;
    law.F.resize(static_cast<std::size_t>(G.regimes()));
    for (int i = 0; i < G.regimes(); ++i) {
        const Matrix& B = sys.regimes[i].B;
        for (int k = 0; k < G.intervals(); ++k) {
            const Matrix& Gik = G.G[i][k];
            if (Gik.rows() != sys.m || Gik.cols() != sys.m)
                throw DimensionError("G[" + std::to_string(i) + "]", "wrong shape");
            law.F[i].push_back(w.D_at(i, k).ldlt().solve(B.transpose() * Gik));
        }
    }
    return law;
}

RegimeSystem closed_loop(const RegimeSystem& sys, const FeedbackLaw& law, int k) {
    if (static_cast<int>(law.F.size()) != sys.regime_count())
        throw DimensionError("F", "expected " + std::to_string(sys.regime_count()) + " regimes");
    RegimeSystem out = sys;
    for (int i = 0; i < sys.regime_count(); ++i) {
        Regime& reg = out.regimes[i];
        reg.A -= reg.B * law.at(i, k);
        reg.B.setZero();
    }
    return out;
}

double lyapunov_value(const GainSet& G, int i, int k, const Vector& x) {
    return linalg::bilinear_form(G.at(i, k), x, x);
}

}  // namespace jumpstab
