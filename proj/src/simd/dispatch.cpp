#include <cstdlib>
#include <string>

#include "lcgan/simd/kernels.hpp"

namespace lcgan::simd {

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& kernels_for(Isa isa) {
#if defined(__x86_64__) || defined(_M_X64)
  if (isa == Isa::avx2 && isa_supported(Isa::avx2)) return detail::avx2_table();
#endif
  return detail::scalar_table();
}

namespace {
const KernelTable& select() {
  if (const char* forced = std::getenv("LCGAN_SIMD")) {
    if (std::string(forced) == "scalar") return detail::scalar_table();
  }
  return kernels_for(Isa::avx2);
}
}  // namespace

const KernelTable& kernels() {
  static const KernelTable& active = select();
  return active;
}

}  // namespace lcgan::simd
