#include "eiu/checkpoint.hpp"

#include <fstream>
#include <limits>

#include "wire.hpp"

namespace eiu {

namespace wire {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open file for writing: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + path);
}

}  // namespace wire

namespace {
constexpr char kMagic[4] = {'E', 'I', 'U', 'P'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

std::string encode_checkpoint(const NamedTensorList& params, Dtype dtype) {
    std::string out;
    out.append(kMagic, 4);
    wire::put_u8(out, kVersion);
    for (const auto& [path, t] : params) {
        if (path.size() > std::numeric_limits<std::uint16_t>::max()) {
            throw ContractError("checkpoint: parameter path too long: " + path);
        }
        wire::put_u16(out, static_cast<std::uint16_t>(path.size()));
        out.append(path);
        wire::put_u8(out, static_cast<std::uint8_t>(dtype));
        wire::put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) wire::put_u32(out, static_cast<std::uint32_t>(d));
        if (dtype == Dtype::f64) {
            for (double v : t.data()) wire::put_f64(out, v);
        } else {
            for (double v : t.data()) wire::put_f32(out, static_cast<float>(v));
        }
    }
    return out;
}

NamedTensorList decode_checkpoint(const std::string& bytes) {
    wire::Reader r(bytes, "checkpoint");
    if (r.str(4) != std::string(kMagic, 4)) throw FormatError("checkpoint: bad magic");
    const std::uint8_t version = r.u8();
    if (version != kVersion) {
        throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    }
    NamedTensorList out;
    while (!r.eof()) {
        const std::uint16_t plen = r.u16();
        std::string path = r.str(plen);
        const std::uint8_t dt = r.u8();
        if (dt > 1) throw FormatError("checkpoint: unknown dtype code " + std::to_string(dt));
        const std::uint32_t ndim = r.u32();
        Shape shape;
        std::size_t n = 1;
        for (std::uint32_t i = 0; i < ndim; ++i) {
            shape.push_back(r.u32());
            n *= shape.back();
        }
        std::vector<double> data(n);
        for (std::size_t i = 0; i < n; ++i) {
            data[i] = dt == 1 ? r.f64() : static_cast<double>(r.f32());
        }
        out.emplace_back(std::move(path), Tensor(std::move(shape), std::move(data)));
    }
    return out;
}

void save_checkpoint(const std::string& path, const NamedTensorList& params, Dtype dtype) {
    wire::write_file(path, encode_checkpoint(params, dtype));
}

NamedTensorList load_checkpoint(const std::string& path) {
    return decode_checkpoint(wire::read_file(path));
}

}  // namespace eiu
