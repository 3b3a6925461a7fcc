#include "stabledrift/simd.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace sdrift::simd {
namespace {

bool cpu_has_avx2() {
#if defined(SDRIFT_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* table_for(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return &scalar_kernels();
        case Isa::avx2:
#if defined(SDRIFT_BUILD_AVX2)
            return cpu_has_avx2() ? &avx2_kernels() : nullptr;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

const KernelTable* initial_table() {
    if (const char* env = std::getenv("SDRIFT_ISA"); env && std::strcmp(env, "scalar") == 0)
        return &scalar_kernels();
    if (const KernelTable* t = table_for(Isa::avx2)) return t;
    return &scalar_kernels();
}

std::atomic<const KernelTable*>& current() {
    static std::atomic<const KernelTable*> ptr{initial_table()};
    return ptr;
}

}  // namespace

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

bool isa_supported(Isa isa) { return table_for(isa) != nullptr; }

bool force_isa(Isa isa) {
    const KernelTable* t = table_for(isa);
    if (!t) return false;
    current().store(t, std::memory_order_release);
    return true;
}

std::vector<Isa> supported_isas() {
    std::vector<Isa> out{Isa::scalar};
    if (isa_supported(Isa::avx2)) out.push_back(Isa::avx2);
    return out;
}

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar:
            return "scalar";
        case Isa::avx2:
            return "avx2";
    }
    return "unknown";
}

}  // namespace sdrift::simd
