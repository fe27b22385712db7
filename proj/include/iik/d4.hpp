#pragma once

#include "iik/tensor.hpp"

// The eight symmetries of the square acting on CHW tensors.  Convention:
// an element first mirrors horizontally (x -> w-1-x), then rotates
// counter-clockwise by `rot` quarter turns.

namespace iik::d4 {

struct Elem {
    int rot = 0;       // quarter turns, 0..3
    bool reflect = false;
};

inline constexpr int kCount = 8;

inline Elem element(int id) {
    if (id < 0 || id >= kCount) throw ConfigError("d4 element id out of range");
    return {id & 3, (id & 4) != 0};
}

inline int id(const Elem& e) { return (e.rot & 3) + (e.reflect ? 4 : 0); }

// a.compose(b): apply b first, then a.
Elem compose(const Elem& a, const Elem& b);
Elem inverse(const Elem& e);

// Returns the transformed tensor; 90/270 turns swap H and W.
Tensor apply(const Elem& e, const Tensor& chw);

}  // namespace iik::d4
