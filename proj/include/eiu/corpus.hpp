#pragma once

#include <string>
#include <vector>

#include "eiu/data.hpp"

namespace eiu {

// "HH:MM:SS,mmm" <-> integer milliseconds
std::int64_t parse_timestamp_ms(const std::string& text);
std::string format_timestamp_ms(std::int64_t ms);

// Annotation CSV with the 11 fixed columns (Subtitle, Dia_No, Utt_No,
// Video_name, Season, Episode, Begin_timestamp, End_timestamp, Emotion,
// Intent, Speaker), RFC-style quoting. Parse validates labels against the
// closed vocabularies and reports the offending row on error.
std::vector<AnnotationRecord> parse_annotations_csv(const std::string& bytes);
std::string serialize_annotations_csv(const std::vector<AnnotationRecord>& records);

// Portable feature container "EIUF": magic, version u8, dtype u8 (0 = f32),
// u32 ndim, u32 dims, little-endian row-major payload. Bit-exact round-trip.
std::string encode_feature(const Tensor& matrix);
Tensor decode_feature(const std::string& bytes);
Tensor read_feature_file(const std::string& path);
void write_feature_file(const std::string& path, const Tensor& matrix);

struct ModalityFolders {
    std::string textual = "textual";
    std::string acoustic = "acoustic";
    std::string visual = "visual";
};

// Groups records into conversations and loads
// {root}/{modality_folder}/dia_{d}_utt_{u}.eiuf for every enabled modality.
// Missing files are reported all at once; utt_no gaps are data errors.
std::vector<Conversation> assemble_conversations(const std::vector<AnnotationRecord>& records,
                                                 const std::string& feature_root,
                                                 const ModalityMask& mask,
                                                 const ModalityFolders& folders = {});

std::string feature_file_name(std::int64_t dia_no, std::int64_t utt_no);

}  // namespace eiu
