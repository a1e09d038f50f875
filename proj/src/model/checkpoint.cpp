#include "wss/model/checkpoint.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wss {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

namespace {

std::string shape_text(const std::vector<int>& shape) {
    std::string s;
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
    return s;
}

std::vector<int> parse_shape(const std::string& text) {
    std::vector<int> shape;
    std::stringstream ss(text);
    std::string dim;
    while (std::getline(ss, dim, 'x')) shape.push_back(std::stoi(dim));
    return shape;
}

std::string float_text(float v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

void save_checkpoint(const fs::path& path, const NetworkParams& params) {
    std::ostringstream header;
    header << "WSS-CHECKPOINT 1\n";
    header << "architecture " << params.architecture_id << "\n";
    header << "input_mean " << float_text(params.input_mean[0]) << ' ' << float_text(params.input_mean[1]) << ' '
           << float_text(params.input_mean[2]) << "\n";
    for (const auto& [name, t] : params.tensors) {
        const bool present = t.values.size() == t.numel();
        header << "tensor " << name << " float32 " << shape_text(t.shape) << (present ? " present" : " absent") << "\n";
    }
    header << "end\n";
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tmp = fs::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
        const auto h = header.str();
        out.write(h.data(), static_cast<std::streamsize>(h.size()));
        for (const auto& [name, t] : params.tensors)
            if (t.values.size() == t.numel())
                out.write(reinterpret_cast<const char*>(t.values.data()),
                          static_cast<std::streamsize>(t.values.size() * sizeof(float)));
        if (!out) throw std::runtime_error("checkpoint write failed: " + path.string());
    }
    fs::rename(tmp, path);
}

NetworkParams load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    auto fail = [&](const std::string& why) { return std::runtime_error("checkpoint " + path.string() + ": " + why); };
    std::string line;
    if (!std::getline(in, line) || line != "WSS-CHECKPOINT 1") throw fail("bad magic");
    NetworkParams params;
    struct Pending {
        std::string name;
        bool present;
    };
    std::vector<Pending> order;
    while (std::getline(in, line)) {
        if (line == "end") break;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "architecture") {
            std::getline(ls >> std::ws, params.architecture_id);
        } else if (tag == "input_mean") {
            for (auto& m : params.input_mean) {
                std::string v;
                ls >> v;
                const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), m);
                if (ec != std::errc{}) throw fail("bad input_mean");
            }
        } else if (tag == "tensor") {
            std::string name, dtype, shape, presence;
            ls >> name >> dtype >> shape >> presence;
            if (dtype != "float32") throw fail("unsupported dtype " + dtype + " for " + name);
            Tensor t;
            t.shape = parse_shape(shape);
            params.tensors.emplace(name, std::move(t));
            order.push_back({name, presence == "present"});
        } else {
            throw fail("unexpected header line \"" + line + "\"");
        }
    }
    if (line != "end") throw fail("truncated header");
    const auto expected = params.architecture().tensor_shapes();
    if (expected.size() != params.tensors.size()) throw fail("tensor count does not match " + params.architecture_id);
    for (const auto& [name, shape] : expected) {
        const auto it = params.tensors.find(name);
        if (it == params.tensors.end()) throw fail("missing tensor " + name);
        if (it->second.shape != shape) throw fail("shape mismatch for " + name);
    }
    for (const auto& p : order) {
        if (!p.present) continue;
        auto& t = params.tensors.at(p.name);
        t.values.resize(t.numel());
        in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(t.values.size() * sizeof(float)));
        if (!in) throw fail("truncated payload at " + p.name);
    }
    return params;
}

}  // namespace wss
