#include "ctseq/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ctseq {

namespace {

void put_f32_le(std::string& buf, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  buf.push_back(static_cast<char>(bits & 0xff));
  buf.push_back(static_cast<char>((bits >> 8) & 0xff));
  buf.push_back(static_cast<char>((bits >> 16) & 0xff));
  buf.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_image_file(const std::filesystem::path& base, const Image& image,
                      nlohmann::json provenance) {
  std::string raw;
  raw.reserve(image.pixel_count() * 4);
  double lo = 1.0, hi = 0.0;
  for (double v : image.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
    put_f32_le(raw, static_cast<float>(v));
  }
  write_file(base.string() + ".img", raw);

  nlohmann::json meta;
  meta["format"] = "f32le";
  meta["side"] = image.side();
  meta["value_min"] = lo;
  meta["value_max"] = hi;
  meta["provenance"] = std::move(provenance);
  write_file(base.string() + ".json", meta.dump(2) + "\n");
}

Image read_image_file(const std::filesystem::path& base,
                      nlohmann::json* metadata) {
  const auto meta =
      nlohmann::json::parse(read_file(base.string() + ".json"));
  const int side = meta.at("side").get<int>();
  const std::string raw = read_file(base.string() + ".img");
  const std::size_t expected = static_cast<std::size_t>(side) * side * 4;
  if (raw.size() != expected)
    throw std::runtime_error("image payload size mismatch: " + base.string());
  std::vector<double> values(static_cast<std::size_t>(side) * side);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = static_cast<double>(get_f32_le(p + 4 * i));
  if (metadata) *metadata = meta;
  return Image::from_values(side, std::move(values));
}

void write_measurement_log(const std::filesystem::path& path,
                           std::span<const Measurement> ms) {
  std::string out;
  int step = 1;
  for (const Measurement& m : ms) {
    nlohmann::json rec;
    rec["step"] = step++;
    rec["angle"] = m.angle;
    rec["intensity"] = m.intensity;
    rec["counts"] = m.counts;
    out += rec.dump();
    out += '\n';
  }
  write_file(path, out);
}

std::vector<Measurement> read_measurement_log(
    const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<Measurement> ms;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto rec = nlohmann::json::parse(line);
    Measurement m;
    m.angle = rec.at("angle").get<double>();
    m.intensity = rec.at("intensity").get<double>();
    m.counts = rec.at("counts").get<std::vector<std::int64_t>>();
    ms.push_back(std::move(m));
  }
  return ms;
}

CsvWriter::CsvWriter(std::vector<std::string> header)
    : header_(std::move(header)) {}

void CsvWriter::add_row(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size())
    throw std::invalid_argument("CsvWriter: row width != header width");
  rows_.push_back(cells);
}

std::string CsvWriter::format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string CsvWriter::format(int v) { return std::to_string(v); }

void CsvWriter::write(const std::filesystem::path& path) const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out += ',';
    out += header_[i];
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  write_file(path, out);
}

std::vector<std::vector<std::string>> read_csv(
    const std::filesystem::path& path, std::vector<std::string>* header) {
  std::istringstream in(read_file(path));
  std::string line;
  std::vector<std::vector<std::string>> rows;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (first) {
      if (header) *header = cells;
      first = false;
    } else {
      rows.push_back(std::move(cells));
    }
  }
  return rows;
}

void write_trajectory_csv(const std::filesystem::path& path,
                          const Trajectory& traj) {
  std::vector<std::string> header = {"t", "beta", "threshold"};
  for (const auto& id : traj.candidate_ids) {
    header.push_back("nll_" + id);
    header.push_back("member_" + id);
  }
  // delta rides along as a column so the file is self-contained
  header.push_back("delta");
  CsvWriter csv(header);
  for (std::size_t t = 0; t < traj.step.size(); ++t) {
    std::vector<std::string> row;
    row.push_back(CsvWriter::format(traj.step[t]));
    row.push_back(CsvWriter::format(traj.beta[t]));
    row.push_back(CsvWriter::format(traj.threshold[t]));
    for (std::size_t c = 0; c < traj.candidate_ids.size(); ++c) {
      row.push_back(CsvWriter::format(traj.candidate_nll[c][t]));
      row.push_back(traj.member[c][t] ? "1" : "0");
    }
    row.push_back(CsvWriter::format(traj.delta));
    csv.add_row(row);
  }
  csv.write(path);
}

Trajectory read_trajectory_csv(const std::filesystem::path& path) {
  std::vector<std::string> header;
  const auto rows = read_csv(path, &header);
  Trajectory traj;
  for (const auto& col : header) {
    if (col.rfind("nll_", 0) == 0)
      traj.candidate_ids.push_back(col.substr(4));
  }
  traj.candidate_nll.resize(traj.candidate_ids.size());
  traj.member.resize(traj.candidate_ids.size());
  for (const auto& row : rows) {
    traj.step.push_back(std::stoi(row[0]));
    traj.beta.push_back(std::stod(row[1]));
    traj.threshold.push_back(std::stod(row[2]));
    for (std::size_t c = 0; c < traj.candidate_ids.size(); ++c) {
      traj.candidate_nll[c].push_back(std::stod(row[3 + 2 * c]));
      traj.member[c].push_back(row[4 + 2 * c] == "1");
    }
    traj.delta = std::stod(row.back());
  }
  return traj;
}

void write_pgm(const std::filesystem::path& path, const Image& image,
               double white_point) {
  if (!(white_point > 0.0))
    throw std::invalid_argument("write_pgm: white_point must be > 0");
  std::string out = "P5\n" + std::to_string(image.side()) + " " +
                    std::to_string(image.side()) + "\n255\n";
  for (double v : image.values()) {
    const double scaled = std::min(1.0, std::max(0.0, v / white_point));
    out.push_back(static_cast<char>(
        static_cast<unsigned char>(std::lround(scaled * 255.0))));
  }
  write_file(path, out);
}

}  // namespace ctseq
