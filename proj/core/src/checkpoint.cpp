#include "tabgns/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tabgns/errors.hpp"

namespace tabgns {

namespace {

constexpr char kMagic[8] = {'T', 'G', 'N', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

struct Writer {
    std::vector<std::uint8_t> bytes;

    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64s(const std::vector<double>& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
};

struct Reader {
    const std::vector<std::uint8_t>& bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > bytes.size()) throw IntegrityError("checkpoint truncated");
    }
    std::uint8_t u8() {
        need(1);
        return bytes[pos++];
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    // Overflow-safe variant of need() for element counts read from the file.
    void need_elems(std::uint64_t count, std::size_t elem_size) const {
        if (count > (bytes.size() - pos) / elem_size) {
            throw IntegrityError("checkpoint truncated");
        }
    }
    std::vector<double> f64s() {
        const std::uint64_t n = u64();
        need_elems(n, 8);
        std::vector<double> v(n);
        for (std::uint64_t i = 0; i < n; ++i) v[i] = f64();
        return v;
    }
};

void write_space(Writer& w, const SearchSpace& s) {
    w.u64(s.input_dim);
    w.u64(s.output_dim);
    w.u64(s.hidden_layers);
    w.u64(s.max_width);
    w.u8(s.task == Task::regression ? 0 : 1);
}

SearchSpace read_space(Reader& r) {
    SearchSpace s;
    s.input_dim = r.u64();
    s.output_dim = r.u64();
    s.hidden_layers = r.u64();
    s.max_width = r.u64();
    const std::uint8_t task = r.u8();
    if (task > 1) throw IntegrityError("checkpoint: bad task tag");
    s.task = task == 0 ? Task::regression : Task::classification;
    return s;
}

void write_layers(Writer& w, const std::vector<DenseLayer>& layers) {
    w.u64(layers.size());
    for (const DenseLayer& l : layers) {
        w.u64(l.out_dim());
        w.u64(l.in_dim());
        for (double v : l.weight.values()) w.f64(v);
        for (double v : l.bias) w.f64(v);
    }
}

std::vector<DenseLayer> read_layers(Reader& r) {
    const std::uint64_t n = r.u64();
    if (n > (1u << 20)) throw IntegrityError("checkpoint: implausible layer count");
    std::vector<DenseLayer> layers;
    layers.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t out = r.u64();
        const std::uint64_t in = r.u64();
        if (out > (1u << 24) || in > (1u << 24)) {
            throw IntegrityError("checkpoint: implausible layer shape");
        }
        r.need_elems(out * in + out, 8);
        DenseLayer l = make_dense_layer(out, in);
        for (double& v : l.weight.values()) v = r.f64();
        for (double& v : l.bias) v = r.f64();
        layers.push_back(std::move(l));
    }
    return layers;
}

} // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    if (!ckpt.net && !ckpt.finetuned) {
        throw ConfigError("checkpoint needs a supernet or an architecture");
    }
    Writer w;
    w.bytes.insert(w.bytes.end(), kMagic, kMagic + 8);
    w.u32(kVersion);
    w.u64(ckpt.seed);

    w.u8(ckpt.net.has_value() ? 1 : 0);
    if (ckpt.net) {
        write_space(w, ckpt.net->space);
        write_layers(w, ckpt.net->layers);
        w.u64(ckpt.net->gates.hidden_layers);
        w.u64(ckpt.net->gates.width);
        w.f64(ckpt.net->gates.tau);
        w.f64s(ckpt.net->gates.logits);
    }

    w.u8(ckpt.finetuned.has_value() ? 1 : 0);
    if (ckpt.finetuned) {
        const Architecture& a = *ckpt.finetuned;
        write_space(w, a.space);
        w.u64(a.kept.size());
        for (const auto& k : a.kept) {
            w.u64(k.size());
            for (std::uint32_t idx : k) w.u32(idx);
        }
        write_layers(w, a.layers);
    }

    w.u64(fnv1a(w.bytes.data(), w.bytes.size()));
    return w.bytes;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 + 4 + 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
        throw IntegrityError("not a checkpoint file (bad magic)");
    }
    const std::uint64_t stored = [&] {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
        }
        return v;
    }();
    if (fnv1a(bytes.data(), bytes.size() - 8) != stored) {
        throw IntegrityError("checkpoint checksum mismatch (file corrupt)");
    }

    Reader r{bytes};
    r.pos = 8;
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw IntegrityError("unsupported checkpoint version " + std::to_string(version));
    }

    Checkpoint ckpt;
    ckpt.seed = r.u64();
    if (r.u8() == 1) {
        SuperNet net;
        net.space = read_space(r);
        net.layers = read_layers(r);
        net.gates.hidden_layers = r.u64();
        net.gates.width = r.u64();
        net.gates.tau = r.f64();
        net.gates.logits = r.f64s();
        if (net.gates.logits.size() != net.gates.hidden_layers * net.gates.width) {
            throw IntegrityError("checkpoint: gate count does not match its shape");
        }
        ckpt.net = std::move(net);
    }

    if (r.u8() == 1) {
        Architecture a;
        a.space = read_space(r);
        const std::uint64_t n = r.u64();
        if (n > (1u << 20)) throw IntegrityError("checkpoint: implausible kept-layer count");
        a.kept.resize(n);
        for (auto& k : a.kept) {
            const std::uint64_t m = r.u64();
            r.need_elems(m, 4);
            k.resize(m);
            for (auto& idx : k) idx = r.u32();
        }
        a.layers = read_layers(r);
        ckpt.finetuned = std::move(a);
    }

    if (r.pos != bytes.size() - 8) throw IntegrityError("checkpoint: trailing bytes");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    const std::vector<std::uint8_t> bytes = serialize_checkpoint(ckpt);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

} // namespace tabgns
