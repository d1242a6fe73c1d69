#include "orthnewton/io.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace orthnewton::io {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_fields(const std::string &line) {
  std::vector<std::string> out;
  std::string_view rest(line);
  for (;;) {
    const auto pos = rest.find(',');
    out.push_back(trim(rest.substr(0, pos)));
    if (pos == std::string_view::npos)
      break;
    rest.remove_prefix(pos + 1);
  }
  return out;
}

double parse_double(const std::string &field, const fs::path &path, std::size_t line_no) {
  double v = 0;
  const char *first = field.data();
  const char *last = field.data() + field.size();
  if (!field.empty() && *first == '+')
    ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (field.empty() || ec != std::errc() || ptr != last || !std::isfinite(v))
    throw IoError(path.string() + ":" + std::to_string(line_no) + ": invalid number '" +
                  field + "'");
  return v;
}

std::string format_double(double v) {
  std::array<char, 32> buf{};
  const int len = std::snprintf(buf.data(), buf.size(), "%.17g", v);
  return std::string(buf.data(), static_cast<std::size_t>(len));
}

std::ifstream open_in(const fs::path &path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in)
    throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

std::ofstream open_out(const fs::path &path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path())
    fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out)
    throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

} // namespace

SignalTable read_csv(const fs::path &path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  SignalTable table;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      table.names = split_fields(line);
      break;
    }
  }
  if (table.names.empty())
    throw IoError(path.string() + ": missing header row");
  const std::size_t n = table.names.size();

  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    const auto fields = split_fields(line);
    if (fields.size() != n)
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                    std::to_string(n) + " fields, got " + std::to_string(fields.size()));
    for (const auto &f : fields)
      values.push_back(parse_double(f, path, line_no));
    ++rows;
  }
  // values is sample-major, i.e. a column-major channels x samples matrix.
  table.data = Eigen::Map<const MatrixXd>(values.data(), static_cast<Eigen::Index>(n),
                                          static_cast<Eigen::Index>(rows));
  return table;
}

void write_csv(const fs::path &path, const SignalTable &table) {
  if (static_cast<Eigen::Index>(table.names.size()) != table.data.rows())
    throw InvalidArgument("write_csv: one name per channel required");
  auto out = open_out(path);
  for (std::size_t i = 0; i < table.names.size(); ++i)
    out << (i ? "," : "") << table.names[i];
  out << '\n';
  for (Eigen::Index s = 0; s < table.data.cols(); ++s) {
    for (Eigen::Index i = 0; i < table.data.rows(); ++i)
      out << (i ? "," : "") << format_double(table.data(i, s));
    out << '\n';
  }
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

MatrixXd read_matrix_csv(const fs::path &path) {
  auto in = open_in(path);
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    std::vector<double> row;
    for (const auto &f : split_fields(line))
      row.push_back(parse_double(f, path, line_no));
    if (!rows.empty() && row.size() != rows.front().size())
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": ragged matrix row");
    rows.push_back(std::move(row));
  }
  if (rows.empty())
    throw IoError(path.string() + ": empty matrix file");
  MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      m(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  return m;
}

void write_matrix_csv(const fs::path &path, const MatrixXd &m) {
  auto out = open_out(path);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      out << (c ? "," : "") << format_double(m(r, c));
    out << '\n';
  }
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

namespace {

std::uint32_t le32(const unsigned char *p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

std::uint16_t le16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put32(std::ostream &os, std::uint32_t v) {
  const char b[4] = {char(v & 0xff), char((v >> 8) & 0xff), char((v >> 16) & 0xff),
                     char((v >> 24) & 0xff)};
  os.write(b, 4);
}

void put16(std::ostream &os, std::uint16_t v) {
  const char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
  os.write(b, 2);
}

} // namespace

WavData read_wav(const fs::path &path) {
  auto in = open_in(path, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  const std::string where = path.string() + ": ";
  if (bytes.size() < 12 || std::string(bytes.begin(), bytes.begin() + 4) != "RIFF" ||
      std::string(bytes.begin() + 8, bytes.begin() + 12) != "WAVE")
    throw IoError(where + "not a RIFF/WAVE file");

  WavData wav;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string id(bytes.begin() + static_cast<long>(pos),
                         bytes.begin() + static_cast<long>(pos + 4));
    const std::size_t size = le32(&bytes[pos + 4]);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size())
      throw IoError(where + "truncated '" + id + "' chunk");
    if (id == "fmt ") {
      if (size < 16)
        throw IoError(where + "short fmt chunk");
      const auto format = le16(&bytes[body]);
      const auto channels = le16(&bytes[body + 2]);
      wav.sample_rate = le32(&bytes[body + 4]);
      const auto bits = le16(&bytes[body + 14]);
      if (format != 1 || channels != 1 || bits != 16)
        throw IoError(where + "only 16-bit PCM mono is supported");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt)
        throw IoError(where + "data chunk before fmt chunk");
      const std::size_t count = size / 2;
      wav.samples.resize(static_cast<Eigen::Index>(count));
      for (std::size_t s = 0; s < count; ++s) {
        const auto raw = static_cast<std::int16_t>(le16(&bytes[body + 2 * s]));
        wav.samples(static_cast<Eigen::Index>(s)) = raw / 32768.0;
      }
      return wav;
    }
    pos = body + size + (size & 1);
  }
  throw IoError(where + "no data chunk");
}

void write_wav(const fs::path &path, const WavData &wav) {
  auto out = open_out(path, std::ios::binary);
  const auto count = static_cast<std::uint32_t>(wav.samples.size());
  out.write("RIFF", 4);
  put32(out, 36 + 2 * count);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, wav.sample_rate);
  put32(out, wav.sample_rate * 2);
  put16(out, 2);
  put16(out, 16);
  out.write("data", 4);
  put32(out, 2 * count);
  for (Eigen::Index s = 0; s < wav.samples.size(); ++s) {
    const double v = std::round(wav.samples(s) * 32768.0);
    const auto q = static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
    put16(out, static_cast<std::uint16_t>(q));
  }
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

SignalTable read_wav_channels(const std::vector<fs::path> &paths, unsigned *sample_rate) {
  if (paths.empty())
    throw IoError("no wav files given");
  SignalTable table;
  std::vector<WavData> chans;
  for (const auto &p : paths) {
    chans.push_back(read_wav(p));
    table.names.push_back(p.stem().string());
  }
  const auto len = chans.front().samples.size();
  for (std::size_t i = 0; i < chans.size(); ++i)
    if (chans[i].samples.size() != len)
      throw IoError("wav files differ in length: '" + paths[i].string() + "'");
  table.data.resize(static_cast<Eigen::Index>(chans.size()), len);
  for (std::size_t i = 0; i < chans.size(); ++i)
    table.data.row(static_cast<Eigen::Index>(i)) = chans[i].samples.transpose();
  if (sample_rate)
    *sample_rate = chans.front().sample_rate;
  return table;
}

std::string trace_line(const IterationRecord &rec) {
  nlohmann::ordered_json j;
  j["t"] = rec.t;
  j["F"] = rec.F;
  j["step_norm"] = rec.step_norm;
  j["lambda"] = rec.lambda;
  j["rejected"] = rec.rejected;
  j["ortho_drift"] = rec.ortho_drift;
  return j.dump();
}

void write_trace(std::ostream &os, const std::vector<IterationRecord> &trace) {
  for (const auto &rec : trace)
    os << trace_line(rec) << '\n';
}

void write_trace(const fs::path &path, const std::vector<IterationRecord> &trace) {
  auto out = open_out(path);
  write_trace(out, trace);
  if (!out)
    throw IoError("write failed for '" + path.string() + "'");
}

std::vector<IterationRecord> read_trace(const fs::path &path) {
  auto in = open_in(path);
  std::vector<IterationRecord> trace;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty())
      continue;
    try {
      const auto j = nlohmann::json::parse(line);
      trace.push_back({j.at("t").get<int>(), j.at("F").get<double>(),
                       j.at("step_norm").get<double>(), j.at("lambda").get<double>(),
                       j.at("rejected").get<int>(), j.at("ortho_drift").get<double>()});
    } catch (const nlohmann::json::exception &e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return trace;
}

} // namespace orthnewton::io
