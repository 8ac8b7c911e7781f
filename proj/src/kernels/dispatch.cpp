#include <cstdlib>
#include <string_view>

#include "keyrate/kernels.hpp"

namespace keyrate::simd {

std::string_view to_string(Isa isa) {
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
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable* kernels_for(Isa isa) {
  if (!isa_supported(isa)) return nullptr;
  switch (isa) {
    case Isa::scalar:
      return &detail::scalar_table();
    case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return &detail::avx2_table();
#else
      return nullptr;
#endif
  }
  return nullptr;
}

namespace {

const KernelTable& select_kernels() {
  if (const char* forced = std::getenv("KEYRATE_KERNEL")) {
    const std::string_view name(forced);
    for (Isa isa : {Isa::scalar, Isa::avx2}) {
      if (name == to_string(isa)) {
        if (const auto* table = kernels_for(isa)) return *table;
      }
    }
  }
  if (const auto* table = kernels_for(Isa::avx2)) return *table;
  return detail::scalar_table();
}

}  // namespace

const KernelTable& active_kernels() {
  static const KernelTable& table = select_kernels();
  return table;
}

}  // namespace keyrate::simd
