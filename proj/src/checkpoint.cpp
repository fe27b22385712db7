#include "iik/checkpoint.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "iik/image_io.hpp"
#include "iik/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace iik::ckpt {

namespace {

template <typename T>
json manifest_for(const Archive<T>& a, const char* precision_name) {
    json blocks = json::array();
    char name[64];
    for (size_t i = 0; i < a.blocks.size(); ++i) {
        std::snprintf(name, sizeof(name), "block_%04zu.%s", i,
                      sizeof(T) == 4 ? "iikf" : "iikd");
        blocks.push_back({{"name", a.blocks[i].first},
                          {"shape", a.blocks[i].second.shape},
                          {"file", name}});
    }
    return json{{"format", "iik-checkpoint"},
                {"version", 1},
                {"precision", precision_name},
                {"rng", kRngName},
                {"meta", a.meta},
                {"blocks", blocks}};
}

template <typename T>
void save_impl(const std::string& dir, const Archive<T>& a, const char* precision_name) {
    fs::create_directories(dir);
    const json manifest = manifest_for(a, precision_name);
    std::ofstream mf(dir + "/manifest.json");
    if (!mf) throw IoError("cannot write checkpoint manifest in " + dir);
    mf << manifest.dump(2) << "\n";
    mf.close();
    for (size_t i = 0; i < a.blocks.size(); ++i) {
        const std::string file = dir + "/" + manifest["blocks"][i]["file"].get<std::string>();
        TensorT<T> flat;
        flat.shape = {1, 1, static_cast<int>(a.blocks[i].second.size())};
        flat.data = a.blocks[i].second.data;
        if constexpr (sizeof(T) == 4)
            io::write_iikf(file, flat);
        else
            io::write_iikd(file, flat);
    }
}

json read_manifest(const std::string& dir) {
    std::ifstream mf(dir + "/manifest.json");
    if (!mf) throw IoError("missing checkpoint manifest in " + dir);
    json manifest;
    try {
        mf >> manifest;
    } catch (const json::exception& e) {
        throw IoError(dir + ": corrupt checkpoint manifest: " + e.what());
    }
    if (manifest.value("format", "") != "iik-checkpoint")
        throw IoError(dir + ": not a checkpoint directory");
    return manifest;
}

template <typename T>
Archive<T> load_impl(const std::string& dir, const char* precision_name) {
    const json manifest = read_manifest(dir);
    if (manifest.value("precision", "") != precision_name)
        throw IoError(dir + ": checkpoint precision is " + manifest.value("precision", "?") +
                      ", expected " + precision_name);
    Archive<T> a;
    a.meta = manifest.value("meta", json::object());
    for (const json& b : manifest["blocks"]) {
        const std::string file = dir + "/" + b["file"].get<std::string>();
        TensorT<T> flat;
        if constexpr (sizeof(T) == 4)
            flat = io::read_iikf32(file);
        else
            flat = io::read_iikd(file);
        TensorT<T> t;
        t.shape = b["shape"].get<std::vector<int>>();
        if (TensorT<T>::count(t.shape) != flat.size())
            throw IoError(file + ": payload size does not match manifest shape");
        t.data = std::move(flat.data);
        a.blocks.emplace_back(b["name"].get<std::string>(), std::move(t));
    }
    return a;
}

}  // namespace

void save(const std::string& dir, const Archive<float>& a) { save_impl(dir, a, "f32"); }
void save(const std::string& dir, const Archive<double>& a) { save_impl(dir, a, "f64"); }

Archive<float> load_f32(const std::string& dir) { return load_impl<float>(dir, "f32"); }
Archive<double> load_f64(const std::string& dir) { return load_impl<double>(dir, "f64"); }

std::string precision(const std::string& dir) {
    return read_manifest(dir).value("precision", "");
}

}  // namespace iik::ckpt
