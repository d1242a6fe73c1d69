#pragma once

// File formats used by the command-line tool.
//
// CSV signals: a header row with channel names, then one row per sample
// (column = channel). Values are written with 17 significant digits.
// Matrix files: plain CSV, one matrix row per line, no header.
// WAV: 16-bit PCM mono, one file per channel, samples scaled to [-1, 1).
// Traces: one JSON object per line with keys t, F, step_norm, lambda,
// rejected, ortho_drift.

#include "orthnewton/core.hpp"
#include "orthnewton/optimizer.hpp"

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace orthnewton::io {

class IoError : public Error {
public:
  using Error::Error;
};

struct SignalTable {
  std::vector<std::string> names;
  /// channels x samples
  MatrixXd data;
};

SignalTable read_csv(const std::filesystem::path &path);
void write_csv(const std::filesystem::path &path, const SignalTable &table);

MatrixXd read_matrix_csv(const std::filesystem::path &path);
void write_matrix_csv(const std::filesystem::path &path, const MatrixXd &m);

struct WavData {
  unsigned sample_rate = 44100;
  VectorXd samples;
};

WavData read_wav(const std::filesystem::path &path);
/// Samples outside [-1, 1) are clipped.
void write_wav(const std::filesystem::path &path, const WavData &wav);

/// Equal-length mono files stacked as rows.
SignalTable read_wav_channels(const std::vector<std::filesystem::path> &paths,
                              unsigned *sample_rate = nullptr);

std::string trace_line(const IterationRecord &rec);
void write_trace(std::ostream &os, const std::vector<IterationRecord> &trace);
void write_trace(const std::filesystem::path &path, const std::vector<IterationRecord> &trace);
std::vector<IterationRecord> read_trace(const std::filesystem::path &path);

} // namespace orthnewton::io
