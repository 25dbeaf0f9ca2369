#pragma once

#include <cstdint>
#include <filesystem>

#include "driftreg/volume.hpp"

namespace driftreg {

// NIfTI-1 datatype codes this reader accepts.
enum class NiftiDatatype : std::int16_t {
    uint8 = 2,
    int16 = 4,
    float32 = 16,
};

struct VolumeHeader {
    NiftiDatatype datatype = NiftiDatatype::float32;
    Dims dims{};
    Spacing spacing{1.0, 1.0, 1.0};
    double scl_slope = 0.0;  // 0 means "no scaling" per NIfTI-1
    double scl_inter = 0.0;
    std::int64_t vox_offset = 352;
};

// Parses and validates the 348-byte header of a single-file .nii.
VolumeHeader read_nifti_header(const std::filesystem::path& path);

// .nii (NIfTI-1, little-endian, uint8/int16/float32) or .vol with a .json
// sidecar. Integer data is converted with slope/intercept.
Volume load_volume(const std::filesystem::path& path);

// Writes float32. The extension selects the format (.nii or .vol).
void save_volume(const Volume& v, const std::filesystem::path& path);

// Raw .vol: three concatenated float32 channels, sidecar {"channels": 3}.
DeformationField load_field(const std::filesystem::path& path);
void save_field(const DeformationField& u, const std::filesystem::path& path);

// Label maps travel as integer-valued volumes in either format.
LabelMap load_labels(const std::filesystem::path& path);
void save_labels(const LabelMap& labels, const std::filesystem::path& path, Spacing spacing = {1.0, 1.0, 1.0});

}  // namespace driftreg
