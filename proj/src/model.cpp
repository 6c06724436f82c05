#include "cds/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace cds {

namespace {

constexpr char kMagic[4] = {'C', 'D', 'S', 'W'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void write_f64(std::ostream& os, double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

double read_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t u = 0;
    for (int i = 0; i < 8; ++i) u |= static_cast<uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

} // namespace

Var Model::add(const std::string& name, Array init, double lr_mult) {
    if (find(name)) throw std::invalid_argument("Model: duplicate parameter name " + name);
    Param p;
    p.var = Var(std::move(init), true);
    p.name = name;
    p.lr_mult = lr_mult;
    params_.push_back(p);
    return params_.back().var;
}

Param* Model::find(const std::string& name) {
    for (auto& p : params_)
        if (p.name == name) return &p;
    return nullptr;
}

void Model::sgd_step(double lr) {
    for (auto& p : params_) {
        Array& v = p.var.mutable_value();
        const Array& g = p.var.node()->grad;
        if (g.empty()) continue;
        const double step = lr * p.lr_mult;
        const long n = v.numel();
        for (long i = 0; i < n; ++i) v[i] -= step * g[i];
    }
    zero_grad();
}

double Model::grad_norm() const {
    double sq = 0;
    for (const auto& p : params_) {
        const Array& g = p.var.node()->grad;
        for (long i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
    }
    return std::sqrt(sq);
}

void Model::clip_grad_norm(double max_norm) {
    if (max_norm <= 0) return;
    const double norm = grad_norm();
    if (norm <= max_norm) return;
    const double scale = max_norm / norm;
    for (auto& p : params_) {
        Array& g = p.var.node()->grad;
        for (long i = 0; i < g.numel(); ++i) g[i] *= scale;
    }
}

void Model::zero_grad() {
    for (auto& p : params_) {
        Array& g = p.var.node()->grad;
        if (!g.empty()) g.fill(0.0);
    }
}

long Model::total_parameters() const {
    long n = 0;
    for (const auto& p : params_) n += p.var.numel();
    return n;
}

void Model::save(const std::string& path) const {
    std::vector<const Param*> sorted;
    sorted.reserve(params_.size());
    for (const auto& p : params_) sorted.push_back(&p);
    std::sort(sorted.begin(), sorted.end(), [](const Param* a, const Param* b) { return a->name < b->name; });

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_u32(os, static_cast<uint32_t>(sorted.size()));
    for (const Param* p : sorted) {
        write_u32(os, static_cast<uint32_t>(p->name.size()));
        os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        const Array& a = p->var.value();
        write_u32(os, static_cast<uint32_t>(a.rank()));
        for (int d : a.shape()) write_u32(os, static_cast<uint32_t>(d));
        for (long i = 0; i < a.numel(); ++i) write_f64(os, a[i]);
    }
    if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

std::vector<Model::ParamInfo> Model::peek(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bad checkpoint magic: " + path);
    if (read_u32(is) != kVersion) throw std::runtime_error("unsupported checkpoint version");
    const uint32_t count = read_u32(is);
    std::vector<ParamInfo> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        ParamInfo info;
        const uint32_t len = read_u32(is);
        info.name.resize(len);
        is.read(info.name.data(), len);
        const uint32_t rank = read_u32(is);
        info.shape.resize(rank);
        long numel = 1;
        for (auto& d : info.shape) {
            d = static_cast<int>(read_u32(is));
            numel *= d;
        }
        is.seekg(numel * 8, std::ios::cur);
        if (!is) throw std::runtime_error("truncated checkpoint: " + path);
        out.push_back(std::move(info));
    }
    return out;
}

void Model::load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bad checkpoint magic: " + path);
    const uint32_t version = read_u32(is);
    if (version != kVersion) throw std::runtime_error("unsupported checkpoint version");
    const uint32_t count = read_u32(is);
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t len = read_u32(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        const uint32_t rank = read_u32(is);
        std::vector<int> shape(rank);
        for (auto& d : shape) d = static_cast<int>(read_u32(is));
        Param* p = find(name);
        if (!p) throw std::runtime_error("checkpoint has unknown parameter: " + name);
        Array& v = p->var.mutable_value();
        if (v.shape() != shape)
            throw std::runtime_error("checkpoint shape mismatch for " + name + ": file has " +
                                     Array(shape).shape_str() + ", model has " + v.shape_str());
        for (long j = 0; j < v.numel(); ++j) v[j] = read_f64(is);
        if (!is) throw std::runtime_error("truncated checkpoint: " + path);
    }
}

} // namespace cds
