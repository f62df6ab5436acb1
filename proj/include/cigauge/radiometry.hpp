#pragma once

#include <string_view>

namespace cigauge {

struct CameraSpec {
  double f_number = 11.0;
  double exposure_s = 6e-3;
  double quantum_eff = 0.5;
  double pixel_m = 8e-6;
  double read_noise_e = 4.0;   // σ_r, electrons
  double reflectivity = 0.5;

  // Throws InvalidArgument unless every field is positive and the two
  // fractions lie in (0, 1].
  void validate() const;
};

// Isotropic affine noise: variance = σ_r² + C(H)·J.
struct NoiseSpec {
  double variance_e2 = 0.0;
  double j_e = 0.0;
  double throughput = 1.0;
  double read_noise_e = 0.0;

  // Pure read-noise model with the given variance (J = 0, C = 1).
  static NoiseSpec from_variance(double variance_e2);
};

// Mean photo-electrons per pixel of the impulse camera:
// J = 1e15 · (F/#)⁻² · t · lux · R · q · δ².
double photons_per_pixel(const CameraSpec& cam, double lux);

// Inverse of photons_per_pixel in lux.
double lux_for_photons(const CameraSpec& cam, double j);

NoiseSpec noise_for(double sys_throughput, double j, double read_noise);

// "slr" (8 µm), "mvc" (2.5 µm), "spc" (1 µm); other names throw InvalidArgument.
CameraSpec preset(std::string_view name);

// The Gaussian stand-in for photon noise is loose below ~10 e⁻.
inline bool gaussian_approx_questionable(double sys_throughput, double j) {
  return sys_throughput * j < 10.0;
}

}  // namespace cigauge
