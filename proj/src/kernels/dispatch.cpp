#include <cstdlib>
#include <cstring>

#include "skelmorph/error.hpp"
#include "skelmorph/kernels.hpp"

namespace skelmorph::kernels {

namespace {

constexpr KernelTable scalar_table{Isa::scalar, &scalar::nearest, &scalar::gemm_acc, &scalar::sq_dist};

#if defined(__x86_64__) || defined(_M_X64)
constexpr KernelTable avx2_table{Isa::avx2, &avx2::nearest, &avx2::gemm_acc, &avx2::sq_dist};
#endif

const KernelTable& select_active() {
    if (const char* forced = std::getenv("SKELMORPH_ISA"); forced && std::strcmp(forced, "scalar") == 0)
        return scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
    if (supported(Isa::avx2)) return avx2_table;
#endif
    return scalar_table;
}

}  // namespace

std::string_view to_string(Isa isa) noexcept {
    return isa == Isa::avx2 ? "avx2" : "scalar";
}

bool supported(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar:
            return true;
        case Isa::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2");
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
    if (!supported(isa)) fail(ErrorCode::parameter, "instruction set not supported on this CPU: " + std::string(to_string(isa)));
#if defined(__x86_64__) || defined(_M_X64)
    if (isa == Isa::avx2) return avx2_table;
#endif
    return scalar_table;
}

const KernelTable& active() {
    static const KernelTable& chosen = select_active();
    return chosen;
}

}  // namespace skelmorph::kernels
