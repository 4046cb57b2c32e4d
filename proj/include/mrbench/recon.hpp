#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrbench/coil.hpp"
#include "mrbench/sampling.hpp"
#include "mrbench/types.hpp"

namespace mrb {

enum class ReconMethod { ZeroFilled, CsTv, CgSense };
enum class CsMode { Ista, Fista };

std::string to_string(ReconMethod m);
ReconMethod recon_method_from_string(const std::string &s);

// Default iteration budgets (see tools/baseline_sweep).
inline constexpr std::size_t kCgSenseDefaultIters = 3;
inline constexpr std::size_t kCsTvDefaultIters = 30;

struct ReconConfig {
  ReconMethod method = ReconMethod::ZeroFilled;
  // Absolute TV weight; when unset cs_tv uses lambda_scale * ||y||_2 per slice.
  std::optional<double> lambda_tv;
  double lambda_scale = 1e-3;
  std::size_t max_iters = kCsTvDefaultIters;
  double tol = 1e-6;
  CsMode cs_mode = CsMode::Fista;
  std::size_t tv_inner_iters = 20;
  std::size_t crop = kCropSize;
  unsigned jobs = 1;

  void validate() const;
  Json to_json() const;
  // Missing keys take the defaults of the named method.
  static ReconConfig from_json(const Json &j);
  static ReconConfig defaults(ReconMethod m);
};

// Per-slice solver diagnostics.
struct SolverTrace {
  std::vector<double> data_residual;   // ||A x_k - y||
  std::vector<double> normal_residual; // ||A^H (A x_k - y)||, cg_sense only
  std::vector<double> objective;       // 0.5||Ax - y||^2 + lambda TV(x), cs_tv only
  std::size_t iterations = 0;
  bool converged = false;
  double lambda = 0.0;
};

struct ReconOutput {
  MagnitudeVolume image;
  std::vector<SolverTrace> traces;
};

// Forward model for one slice: y_c = M F (s_c . x).
class SenseOperator {
public:
  SenseOperator(const SensitivityMaps &maps, const SamplingMask &mask);

  std::size_t ncoils() const { return maps_.ncoils; }
  std::size_t height() const { return maps_.height; }
  std::size_t width() const { return maps_.width; }

  CoilImages forward(std::span<const cx> image) const;
  std::vector<cx> adjoint(const CoilImages &ksp) const;
  // Zeroes unsampled columns in place.
  void apply_mask(CoilImages &ksp) const;

private:
  const SensitivityMaps &maps_;
  std::vector<bool> lines_;
};

// Unit-magnitude single-channel maps for single-coil reconstruction.
SensitivityMaps identity_maps(std::size_t height, std::size_t width);

// Per slice: ifft2c per coil, RSS, centre crop.
MagnitudeVolume zero_filled(const KSpaceVolume &ksp, std::size_t crop = kCropSize);

inline constexpr double kSensitivityEpsilon = 1e-8;

// Low-resolution calibration from the fully sampled centre block (raised-cosine
// apodised along the phase-encode axis), normalised by its RSS.
SensitivityMaps estimate_sensitivities(const KSpaceVolume &ksp, std::size_t slice, double center_fraction);
std::vector<SensitivityMaps> estimate_sensitivities(const KSpaceVolume &ksp, double center_fraction);

// maps holds either one entry shared by every slice or one per slice.
ReconOutput cg_sense(const KSpaceVolume &ksp, const SamplingMask &mask, std::span<const SensitivityMaps> maps,
                     const ReconConfig &cfg);

// Single-coil input uses identity maps; multi-coil input without maps falls
// back to estimate_sensitivities with the mask's centre fraction.
ReconOutput cs_tv(const KSpaceVolume &ksp, const SamplingMask &mask, const ReconConfig &cfg,
                  std::span<const SensitivityMaps> maps = {});

// Dispatches on cfg.method; the mask is read from the case attrs when needed.
ReconOutput reconstruct(const KSpaceVolume &ksp, const ReconConfig &cfg);

// Isotropic total variation with forward differences and reflective boundary.
double total_variation(std::span<const cx> image, std::size_t height, std::size_t width);

// argmin_x 0.5||x - z||^2 + weight TV(x) by projected gradient on the dual;
// `dual` (2 * height * width entries) warm-starts and receives the final state.
std::vector<cx> tv_prox(std::span<const cx> z, std::size_t height, std::size_t width, double weight,
                        std::size_t iters, std::vector<cx> &dual);

} // namespace mrb
