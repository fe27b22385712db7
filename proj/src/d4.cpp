#include "iik/d4.hpp"

namespace iik::d4 {

namespace {

// One counter-clockwise quarter turn: out(y, x) = in(x, w-1-y).
Tensor rot90(const Tensor& t) {
    const int c = t.shape[0], h = t.shape[1], w = t.shape[2];
    Tensor out({c, w, h});
    for (int ch = 0; ch < c; ++ch) {
        const double* src = t.ptr() + static_cast<size_t>(ch) * h * w;
        double* dst = out.ptr() + static_cast<size_t>(ch) * h * w;
        for (int y = 0; y < w; ++y)
            for (int x = 0; x < h; ++x) dst[static_cast<size_t>(y) * h + x] = src[static_cast<size_t>(x) * w + (w - 1 - y)];
    }
    return out;
}

Tensor mirror_x(const Tensor& t) {
    const int c = t.shape[0], h = t.shape[1], w = t.shape[2];
    Tensor out(t.shape);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y) {
            const double* src = t.ptr() + (static_cast<size_t>(ch) * h + y) * w;
            double* dst = out.ptr() + (static_cast<size_t>(ch) * h + y) * w;
            for (int x = 0; x < w; ++x) dst[x] = src[w - 1 - x];
        }
    return out;
}

}  // namespace

Elem compose(const Elem& a, const Elem& b) {
    // r^a.rot m^a.ref r^b.rot m^b.ref, using m r = r^-1 m.
    const int br = a.reflect ? (4 - b.rot) & 3 : b.rot;
    return {(a.rot + br) & 3, a.reflect != b.reflect};
}

Elem inverse(const Elem& e) {
    return {e.reflect ? e.rot : (4 - e.rot) & 3, e.reflect};
}

Tensor apply(const Elem& e, const Tensor& chw) {
    if (chw.rank() != 3) throw ConfigError("d4::apply expects a CHW tensor");
    Tensor out = e.reflect ? mirror_x(chw) : chw;
    for (int i = 0; i < (e.rot & 3); ++i) out = rot90(out);
    return out;
}

}  // namespace iik::d4
