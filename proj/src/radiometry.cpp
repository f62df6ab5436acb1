#include "cigauge/radiometry.hpp"

#include <cmath>
#include <string>

#include "cigauge/errors.hpp"

namespace cigauge {

void CameraSpec::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(f_number) || !positive(exposure_s) || !positive(pixel_m) ||
      !positive(read_noise_e))
    throw InvalidArgument("camera parameters must be strictly positive");
  if (!positive(quantum_eff) || quantum_eff > 1.0)
    throw InvalidArgument("quantum efficiency must lie in (0, 1]");
  if (!positive(reflectivity) || reflectivity > 1.0)
    throw InvalidArgument("reflectivity must lie in (0, 1]");
}

NoiseSpec NoiseSpec::from_variance(double variance_e2) {
  if (!(variance_e2 > 0.0) || !std::isfinite(variance_e2))
    throw InvalidArgument("noise variance must be positive");
  return NoiseSpec{variance_e2, 0.0, 1.0, std::sqrt(variance_e2)};
}

double photons_per_pixel(const CameraSpec& cam, double lux) {
  cam.validate();
  if (!(lux >= 0.0) || !std::isfinite(lux))
    throw InvalidArgument("lux must be non-negative");
  return 1e15 / (cam.f_number * cam.f_number) * cam.exposure_s * lux * cam.reflectivity *
         cam.quantum_eff * (cam.pixel_m * cam.pixel_m);
}

double lux_for_photons(const CameraSpec& cam, double j) {
  if (!(j >= 0.0)) throw InvalidArgument("signal level J must be non-negative");
  return j / photons_per_pixel(cam, 1.0);
}

NoiseSpec noise_for(double sys_throughput, double j, double read_noise) {
  if (!(sys_throughput >= 0.0) || !(j >= 0.0) || !(read_noise >= 0.0))
    throw InvalidArgument("noise_for: throughput, J and read noise must be non-negative");
  const double variance = read_noise * read_noise + sys_throughput * j;
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw InvalidArgument("noise_for: total noise variance is zero (degenerate likelihood)");
  return NoiseSpec{variance, j, sys_throughput, read_noise};
}

CameraSpec preset(std::string_view name) {
  CameraSpec cam;
  if (name == "slr") cam.pixel_m = 8e-6;
  else if (name == "mvc") cam.pixel_m = 2.5e-6;
  else if (name == "spc") cam.pixel_m = 1e-6;
  else throw InvalidArgument("unknown camera preset '" + std::string(name) + "' (slr|mvc|spc)");
  return cam;
}

}  // namespace cigauge
