#pragma once

#include <filesystem>
#include <iosfwd>

#include "mordred/seq2seq.hpp"

// Checkpoint layout:
//   a plain-text header of key=value lines terminated by "end_header", then for
//   every tensor a line "tensor <name> <rows> <cols>" followed by rows*cols
//   little-endian IEEE-754 doubles in row-major order.
namespace mordred::checkpoint {

inline constexpr int kSchemaVersion = 1;

void write(std::ostream& out, const seq2seq::Seq2SeqModel& model);
seq2seq::Seq2SeqModel read(std::istream& in);

void save(const std::filesystem::path& path, const seq2seq::Seq2SeqModel& model);
seq2seq::Seq2SeqModel load(const std::filesystem::path& path);

}  // namespace mordred::checkpoint
