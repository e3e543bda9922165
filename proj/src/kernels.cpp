#include "sadiar/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace sadiar::kernels {

#if defined(SADIAR_HAVE_AVX2)
const KernelTable* avx2_table_impl();
#endif
#if defined(SADIAR_HAVE_NEON)
const KernelTable* neon_table_impl();
#endif

namespace {

bool cpu_has_avx2_fma() {
#if defined(SADIAR_HAVE_AVX2)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* resolve_active() {
  const char* env = std::getenv("SADIAR_KERNELS");
  if (env != nullptr && *env != '\0' && std::string_view(env) != "auto") {
    const KernelTable* t = table_by_name(env);
    if (t == nullptr) {
      throw std::runtime_error(
          std::string("SADIAR_KERNELS: unknown or unsupported variant '") +
          env + "'");
    }
    return t;
  }
  auto tables = available_tables();
  return tables.back();  // best available; scalar is first
}

}  // namespace

const KernelTable* table_by_name(std::string_view name) {
  if (name == "scalar") return &scalar_table();
#if defined(SADIAR_HAVE_AVX2)
  if (name == "avx2" && cpu_has_avx2_fma()) return avx2_table_impl();
#endif
#if defined(SADIAR_HAVE_NEON)
  if (name == "neon") return neon_table_impl();
#endif
  return nullptr;
}

std::vector<const KernelTable*> available_tables() {
  std::vector<const KernelTable*> out;
  out.push_back(&scalar_table());
#if defined(SADIAR_HAVE_AVX2)
  if (cpu_has_avx2_fma()) out.push_back(avx2_table_impl());
#endif
#if defined(SADIAR_HAVE_NEON)
  out.push_back(neon_table_impl());
#endif
  return out;
}

const KernelTable& active() {
  static const KernelTable* table = resolve_active();
  return *table;
}

}  // namespace sadiar::kernels
