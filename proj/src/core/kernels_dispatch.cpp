#include <cstdlib>
#include <string>

#include "lomo/core/kernels.hpp"

namespace lomo::kern {
namespace {

Lane pick_lane() {
  if (const char* env = std::getenv("LOMO_KERNELS")) {
    std::string s(env);
    if (s == "scalar") return Lane::scalar;
    if (s == "avx2" && avx2_supported()) return Lane::avx2;
  }
  return avx2_supported() ? Lane::avx2 : Lane::scalar;
}

// Function-local static so cpuid runs on first use, not during static init.
Lane& lane_ref() {
  static Lane l = pick_lane();
  return l;
}

}  // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Ops& ops() {
  return lane_ref() == Lane::avx2 ? avx2_ops() : scalar_ops();
}

Lane active_lane() { return lane_ref(); }

void force_lane(Lane lane) {
  lane_ref() = (lane == Lane::avx2 && avx2_supported()) ? Lane::avx2 : Lane::scalar;
}

std::string lane_name(Lane lane) {
  return lane == Lane::avx2 ? "avx2" : "scalar";
}

}  // namespace lomo::kern
