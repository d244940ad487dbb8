#ifndef IONGATE_FIDELITY_HPP
#define IONGATE_FIDELITY_HPP

#include <array>
#include <cstdint>
#include <functional>
#include <vector>

#include "iongate/hilbert.hpp"

namespace iongate {

// Two-qubit channel in Kraus form; sum K^dag K = I within 1e-12.
struct QubitChannel {
  std::vector<Mat4> kraus;

  static QubitChannel unitary(const Mat4& u);
  static QubitChannel depolarizing(double strength);  // output (1-s) rho + s I/4

  Mat4 apply(const Mat4& rho) const;
  QubitChannel compose(const QubitChannel& inner) const;  // this after inner
  double completeness_defect() const;                     // max |sum K^dag K - I|
};

// The 6 single-qubit Pauli eigenstates with the fixed phase convention
// +z = (1,0), +x = (1,1)/sqrt2, +y = (1,i)/sqrt2; minus-states orthogonal.
struct PauliEigenbasis {
  std::array<Eigen::Vector2cd, 6> states;  // +x,-x,+y,-y,+z,-z

  static PauliEigenbasis standard();
  // index of the state orthogonal to state i
  static int orthogonal(int i) { return i ^ 1; }
};

// S+ = 1/36 sum_{U1,U2} <U1 U2| G^dag rho_noisy G |U1 U2>
double s_plus(const QubitChannel& channel, const Mat4& ideal);
double s_plus(const QubitChannel& channel, const Mat4& ideal, const PauliEigenbasis& basis);

// Orthogonal-state variant: same rho_noisy(U1, U2), bra/ket |U1bar U2bar>.
double s_minus(const QubitChannel& channel, const Mat4& ideal);
double s_minus(const QubitChannel& channel, const Mat4& ideal, const PauliEigenbasis& basis);

// F_avg = 6/5 S+ + 3/5 S- - 1/5
double avg_fidelity(const QubitChannel& channel, const Mat4& ideal);

// Stochastic channels (e.g. quasi-static noise ensembles) are evaluated by
// averaging the 36-state sums over noise draws. Independent mode draws fresh
// noise for every input state; Shared reuses one draw across all 36 inputs.
enum class NoiseSampling { Independent, Shared };

using NoisyStateFn =
    std::function<Mat4(const Eigen::Vector4cd& input, std::uint64_t draw_seed)>;

struct SampledFidelity {
  double s_plus = 0.0;
  double s_minus = 0.0;
  double f_avg = 0.0;
};

SampledFidelity avg_fidelity_sampled(const NoisyStateFn& rho_noisy, const Mat4& ideal,
                                     int draws, std::uint64_t seed,
                                     NoiseSampling mode = NoiseSampling::Independent);

// Independent oracle: process fidelity from the explicit process matrix,
// F_pro = sum_k |Tr(G^dag K_k)|^2 / d^2; F_avg = (d F_pro + 1)/(d + 1).
double process_fidelity(const QubitChannel& channel, const Mat4& ideal);
double avg_fidelity_from_process(const QubitChannel& channel, const Mat4& ideal);

}  // namespace iongate

#endif
