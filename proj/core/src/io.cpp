#include "driftreg/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "driftreg/error.hpp"

namespace driftreg {
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kDataOffset = 352;

// Field offsets within the NIfTI-1 header.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffSrowX = 280;
constexpr std::size_t kOffMagic = 344;

template <class T>
T get_le(const std::vector<char>& buf, std::size_t off) {
    std::array<char, sizeof(T)> raw;
    std::memcpy(raw.data(), buf.data() + off, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    T v;
    std::memcpy(&v, raw.data(), sizeof(T));
    return v;
}

template <class T>
void put_le(std::vector<char>& buf, std::size_t off, T v) {
    std::array<char, sizeof(T)> raw;
    std::memcpy(raw.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
    std::memcpy(buf.data() + off, raw.data(), sizeof(T));
}

std::vector<char> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("volume", "cannot open " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("volume", "read failed for " + path.string());
    return buf;
}

void write_file(const fs::path& path, const std::vector<char>& buf) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("volume", "cannot open " + path.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    out.close();
    if (!out) throw IoError("volume", "write failed for " + path.string());
}

std::string lower_ext(const fs::path& p) {
    std::string e = p.extension().string();
    for (auto& ch : e) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    return e;
}

std::size_t bytes_per_voxel(NiftiDatatype t) {
    switch (t) {
        case NiftiDatatype::uint8: return 1;
        case NiftiDatatype::int16: return 2;
        case NiftiDatatype::float32: return 4;
    }
    return 0;
}

VolumeHeader parse_header(const std::vector<char>& buf, const fs::path& path) {
    const std::string where = " in " + path.string();
    if (buf.size() < kHeaderSize) throw IoError("volume", "truncated NIfTI header" + where);

    const auto sizeof_hdr = get_le<std::int32_t>(buf, 0);
    if (sizeof_hdr != static_cast<std::int32_t>(kHeaderSize)) {
        const auto u = static_cast<std::uint32_t>(sizeof_hdr);
        const std::uint32_t swapped =
            (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
        if (swapped == kHeaderSize)
            throw IoError("volume", "big-endian NIfTI is not supported" + where);
        throw IoError("volume", "malformed NIfTI header (sizeof_hdr)" + where);
    }
    if (std::memcmp(buf.data() + kOffMagic, "n+1\0", 4) != 0)
        throw IoError("volume", "not a single-file NIfTI-1 (magic)" + where);

    std::array<std::int16_t, 8> dim{};
    for (std::size_t i = 0; i < 8; ++i) dim[i] = get_le<std::int16_t>(buf, kOffDim + 2 * i);
    if (dim[0] < 3 || dim[0] > 7)
        throw IoError("volume", "only 3D images are supported (dim[0]=" + std::to_string(dim[0]) + ")" + where);
    for (int i = 1; i <= 3; ++i)
        if (dim[i] < 1) throw IoError("volume", "malformed NIfTI header (dim)" + where);
    for (int i = 4; i <= dim[0]; ++i)
        if (dim[i] > 1) throw IoError("volume", "only 3D images are supported" + where);

    VolumeHeader h;
    const auto code = get_le<std::int16_t>(buf, kOffDatatype);
    switch (code) {
        case 2: h.datatype = NiftiDatatype::uint8; break;
        case 4: h.datatype = NiftiDatatype::int16; break;
        case 16: h.datatype = NiftiDatatype::float32; break;
        default:
            throw IoError("volume", "unsupported NIfTI datatype " + std::to_string(code) + where);
    }
    const auto bitpix = get_le<std::int16_t>(buf, kOffBitpix);
    if (bitpix != static_cast<std::int16_t>(8 * bytes_per_voxel(h.datatype)))
        throw IoError("volume", "malformed NIfTI header (bitpix)" + where);

    h.dims = {static_cast<std::size_t>(dim[1]), static_cast<std::size_t>(dim[2]),
              static_cast<std::size_t>(dim[3])};
    for (std::size_t i = 0; i < 3; ++i) {
        const double s = get_le<float>(buf, kOffPixdim + 4 * (i + 1));
        if (!(s > 0.0) || !std::isfinite(s))
            throw IoError("volume", "malformed NIfTI header (pixdim)" + where);
        h.spacing[i] = s;
    }
    const double off = get_le<float>(buf, kOffVoxOffset);
    if (!std::isfinite(off) || off < double(kHeaderSize))
        throw IoError("volume", "malformed NIfTI header (vox_offset)" + where);
    h.vox_offset = static_cast<std::int64_t>(off);
    h.scl_slope = get_le<float>(buf, kOffSclSlope);
    h.scl_inter = get_le<float>(buf, kOffSclInter);
    if (!std::isfinite(h.scl_slope) || !std::isfinite(h.scl_inter))
        throw IoError("volume", "malformed NIfTI header (scaling)" + where);
    return h;
}

Volume load_nifti(const fs::path& path) {
    const auto buf = read_file(path);
    const VolumeHeader h = parse_header(buf, path);
    const std::size_t n = h.dims.count();
    const std::size_t bpv = bytes_per_voxel(h.datatype);
    const std::size_t begin = static_cast<std::size_t>(h.vox_offset);
    if (buf.size() < begin + n * bpv)
        throw IoError("volume", "payload of " + path.string() + " is shorter than header dims " +
                                    h.dims.str() + " imply");

    const bool scaled = h.scl_slope != 0.0;
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t at = begin + i * bpv;
        double raw = 0.0;
        switch (h.datatype) {
            case NiftiDatatype::uint8: raw = static_cast<unsigned char>(buf[at]); break;
            case NiftiDatatype::int16: raw = get_le<std::int16_t>(buf, at); break;
            case NiftiDatatype::float32: raw = get_le<float>(buf, at); break;
        }
        data[i] = scaled ? h.scl_slope * raw + h.scl_inter : raw;
    }
    return Volume(h.dims, std::move(data), h.spacing);
}

void save_nifti(const Volume& v, const fs::path& path) {
    const std::size_t n = v.size();
    std::vector<char> buf(kDataOffset + 4 * n, 0);
    put_le<std::int32_t>(buf, 0, static_cast<std::int32_t>(kHeaderSize));
    const Dims& d = v.dims();
    const std::array<std::size_t, 3> ext{d.x, d.y, d.z};
    put_le<std::int16_t>(buf, kOffDim, 3);
    for (std::size_t i = 0; i < 3; ++i) {
        if (ext[i] > 32767) throw ValidationError("volume", "dimension too large for NIfTI-1");
        put_le<std::int16_t>(buf, kOffDim + 2 * (i + 1), static_cast<std::int16_t>(ext[i]));
    }
    for (std::size_t i = 4; i < 8; ++i) put_le<std::int16_t>(buf, kOffDim + 2 * i, 1);
    put_le<std::int16_t>(buf, kOffDatatype, 16);
    put_le<std::int16_t>(buf, kOffBitpix, 32);
    put_le<float>(buf, kOffPixdim, 1.0f);
    for (std::size_t i = 0; i < 3; ++i)
        put_le<float>(buf, kOffPixdim + 4 * (i + 1), static_cast<float>(v.spacing()[i]));
    put_le<float>(buf, kOffVoxOffset, static_cast<float>(kDataOffset));
    put_le<float>(buf, kOffSclSlope, 1.0f);
    put_le<float>(buf, kOffSclInter, 0.0f);
    buf[kOffXyztUnits] = 2;  // mm
    put_le<std::int16_t>(buf, kOffQformCode, 0);
    put_le<std::int16_t>(buf, kOffSformCode, 1);
    for (std::size_t r = 0; r < 3; ++r)
        put_le<float>(buf, kOffSrowX + 16 * r + 4 * r, static_cast<float>(v.spacing()[r]));
    std::memcpy(buf.data() + kOffMagic, "n+1\0", 4);

    for (std::size_t i = 0; i < n; ++i) put_le<float>(buf, kDataOffset + 4 * i, static_cast<float>(v[i]));
    write_file(path, buf);
}

fs::path sidecar_of(const fs::path& vol) {
    fs::path p = vol;
    p.replace_extension(".json");
    return p;
}

struct RawHeader {
    Dims dims{};
    Spacing spacing{1.0, 1.0, 1.0};
    std::size_t channels = 1;
};

RawHeader read_sidecar(const fs::path& vol) {
    const fs::path side = sidecar_of(vol);
    std::ifstream in(side);
    if (!in) throw IoError("volume", "missing sidecar " + side.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw IoError("volume", "malformed sidecar " + side.string() + ": " + e.what());
    }
    static const std::set<std::string> known{"dims", "spacing", "channels"};
    RawHeader h;
    try {
        if (!j.is_object()) throw IoError("volume", "sidecar must be a JSON object");
        for (const auto& [key, _] : j.items())
            if (!known.count(key)) throw IoError("volume", "unknown sidecar key '" + key + "'");
        const auto dims = j.at("dims").get<std::vector<std::int64_t>>();
        if (dims.size() != 3 || dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
            throw IoError("volume", "sidecar dims must be 3 positive integers");
        h.dims = {std::size_t(dims[0]), std::size_t(dims[1]), std::size_t(dims[2])};
        if (j.contains("spacing")) {
            const auto s = j.at("spacing").get<std::vector<double>>();
            if (s.size() != 3) throw IoError("volume", "sidecar spacing must have 3 entries");
            h.spacing = {s[0], s[1], s[2]};
        }
        if (j.contains("channels")) {
            const auto c = j.at("channels").get<std::int64_t>();
            if (c != 1 && c != 3) throw IoError("volume", "sidecar channels must be 1 or 3");
            h.channels = std::size_t(c);
        }
    } catch (const json::exception& e) {
        throw IoError("volume", "malformed sidecar " + side.string() + ": " + e.what());
    }
    return h;
}

void write_sidecar(const fs::path& vol, const Dims& d, const Spacing& s, std::size_t channels) {
    json j;
    j["dims"] = {d.x, d.y, d.z};
    j["spacing"] = {s[0], s[1], s[2]};
    if (channels != 1) j["channels"] = channels;
    const fs::path side = sidecar_of(vol);
    std::ofstream out(side, std::ios::trunc);
    if (!out) throw IoError("volume", "cannot open " + side.string() + " for writing");
    out << j.dump(2) << '\n';
    out.close();
    if (!out) throw IoError("volume", "write failed for " + side.string());
}

std::vector<double> read_raw(const fs::path& path, std::size_t count) {
    const auto buf = read_file(path);
    if (buf.size() != 4 * count)
        throw IoError("volume", "payload of " + path.string() + " has " + std::to_string(buf.size()) +
                                    " bytes, sidecar implies " + std::to_string(4 * count));
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = get_le<float>(buf, 4 * i);
    return out;
}

void write_raw(const fs::path& path, std::span<const double> values) {
    std::vector<char> buf(4 * values.size());
    for (std::size_t i = 0; i < values.size(); ++i) put_le<float>(buf, 4 * i, static_cast<float>(values[i]));
    write_file(path, buf);
}

void require_float_representable(std::span<const double> values, const char* what) {
    require_finite(values, "volume", what);
    for (double v : values)
        if (!std::isfinite(static_cast<float>(v)))
            throw ValidationError("volume", std::string(what) + ": value exceeds float32 range");
}

}  // namespace

VolumeHeader read_nifti_header(const fs::path& path) { return parse_header(read_file(path), path); }

Volume load_volume(const fs::path& path) {
    const std::string ext = lower_ext(path);
    if (ext == ".nii") return load_nifti(path);
    if (ext == ".vol") {
        const RawHeader h = read_sidecar(path);
        if (h.channels != 1) throw IoError("volume", path.string() + " holds a 3-channel field, not a volume");
        return Volume(h.dims, read_raw(path, h.dims.count()), h.spacing);
    }
    throw IoError("volume", "unrecognised volume extension '" + ext + "' (expected .nii or .vol)");
}

void save_volume(const Volume& v, const fs::path& path) {
    require_float_representable(v.data(), "save_volume");
    const std::string ext = lower_ext(path);
    if (ext == ".nii") {
        save_nifti(v, path);
    } else if (ext == ".vol") {
        write_raw(path, v.data());
        write_sidecar(path, v.dims(), v.spacing(), 1);
    } else {
        throw IoError("volume", "unrecognised volume extension '" + ext + "' (expected .nii or .vol)");
    }
}

DeformationField load_field(const fs::path& path) {
    if (lower_ext(path) != ".vol") throw IoError("volume", "deformation fields are stored as .vol");
    const RawHeader h = read_sidecar(path);
    if (h.channels != 3) throw IoError("volume", path.string() + " is not a 3-channel field");
    return DeformationField(h.dims, read_raw(path, 3 * h.dims.count()));
}

void save_field(const DeformationField& u, const fs::path& path) {
    if (lower_ext(path) != ".vol") throw IoError("volume", "deformation fields are stored as .vol");
    require_float_representable(u.components(), "save_field");
    write_raw(path, u.components());
    write_sidecar(path, u.dims(), {1.0, 1.0, 1.0}, 3);
}

LabelMap load_labels(const fs::path& path) {
    const Volume v = load_volume(path);
    std::vector<std::int32_t> labels(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double x = v[i];
        if (x < 0.0 || x != std::round(x) || x > 1e6)
            throw IoError("volume", path.string() + " is not a label map (element " + std::to_string(i) + ")");
        labels[i] = static_cast<std::int32_t>(x);
    }
    return LabelMap(v.dims(), std::move(labels));
}

void save_labels(const LabelMap& labels, const fs::path& path, Spacing spacing) {
    std::vector<double> data(labels.labels().begin(), labels.labels().end());
    save_volume(Volume(labels.dims(), std::move(data), spacing), path);
}

}  // namespace driftreg
