#include <cstring>
#include <string>

#include "mmsr/errors.hpp"
#include "mmsr/kernels.hpp"

namespace mmsr::kernels {
namespace {

const Ops* g_active = nullptr;

const Ops* pick_default() {
    if (const Ops* v = avx2()) return v;
    return &scalar();
}

}  // namespace

const Ops& active() {
    if (!g_active) g_active = pick_default();
    return *g_active;
}

void select(const char* name) {
    if (std::strcmp(name, "scalar") == 0) {
        g_active = &scalar();
        return;
    }
    if (std::strcmp(name, "avx2") == 0) {
        if (const Ops* v = avx2()) {
            g_active = v;
            return;
        }
        throw ParameterError("avx2 kernels not supported on this CPU");
    }
    throw ParameterError(std::string("unknown kernel implementation: ") + name);
}

}  // namespace mmsr::kernels
