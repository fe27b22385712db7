#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "iik/tensor.hpp"

// Named-tensor archives on disk: a directory holding manifest.json plus one
// raw tensor file per block.  Blocks keep their logical shape in the
// manifest (the files store flat payloads), so any rank round-trips.
// Float archives use IIKF payloads, double archives IIKD; both are
// bit-exact.

namespace iik::ckpt {

template <typename T>
struct Archive {
    nlohmann::json meta = nlohmann::json::object();
    std::vector<std::pair<std::string, TensorT<T>>> blocks;

    const TensorT<T>* find(const std::string& name) const {
        for (const auto& [n, t] : blocks)
            if (n == name) return &t;
        return nullptr;
    }

    void add(const std::string& name, TensorT<T> t) { blocks.emplace_back(name, std::move(t)); }
};

void save(const std::string& dir, const Archive<float>& a);
void save(const std::string& dir, const Archive<double>& a);

Archive<float> load_f32(const std::string& dir);
Archive<double> load_f64(const std::string& dir);

// "f32" or "f64" from the manifest, without loading blocks.
std::string precision(const std::string& dir);

}  // namespace iik::ckpt
