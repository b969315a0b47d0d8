#include "fagh/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fagh/errors.hpp"

namespace fagh {

Evaluation evaluate_global(const ModelSpec& spec, const ParamVector& w, const Dataset& train,
                           const Dataset& test) {
  return {loss(spec, w, train.samples), loss(spec, w, test.samples),
          accuracy(spec, w, test.samples)};
}

std::vector<std::optional<std::size_t>> rounds_to_target(std::span<const RoundRecord> records,
                                                         std::span<const double> targets) {
  std::vector<std::optional<std::size_t>> out;
  out.reserve(targets.size());
  for (double target : targets) {
    std::optional<std::size_t> hit;
    for (const auto& r : records) {
      if (r.test_accuracy >= target) {
        hit = r.round;
        break;
      }
    }
    out.push_back(hit);
  }
  return out;
}

std::string format_rounds(const std::optional<std::size_t>& rounds) {
  return rounds ? std::to_string(*rounds) : std::string(kUnreached);
}

namespace {

std::string fmt9(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_field(const std::string& text, const std::filesystem::path& path, std::size_t line_no) {
  T value{};
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), last, value);
  if (text.empty() || ec != std::errc() || ptr != last) {
    throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) +
                      ": bad number '" + text + "'");
  }
  return value;
}

}  // namespace

std::string to_csv(std::span<const RoundRecord> records) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& r : records) {
    out += std::to_string(r.round);
    out += ',' + fmt9(r.train_loss);
    out += ',' + fmt9(r.test_loss);
    out += ',' + fmt9(r.test_accuracy);
    out += ',' + fmt9(r.wall_time_s);
    out += ',' + std::to_string(r.uplink_scalars);
    out += ',' + std::to_string(r.downlink_scalars);
    out += r.fallback ? ",1\n" : ",0\n";
  }
  return out;
}

void write_csv(std::span<const RoundRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  const std::string text = to_csv(records);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<RoundRecord> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path.string() + "': empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader) throw FormatError("'" + path.string() + "': unexpected CSV header");

  std::vector<RoundRecord> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 8) {
      throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) +
                        ": expected 8 fields, found " + std::to_string(f.size()));
    }
    RoundRecord r;
    r.round = parse_field<std::size_t>(f[0], path, line_no);
    r.train_loss = parse_field<double>(f[1], path, line_no);
    r.test_loss = parse_field<double>(f[2], path, line_no);
    r.test_accuracy = parse_field<double>(f[3], path, line_no);
    r.wall_time_s = parse_field<double>(f[4], path, line_no);
    r.uplink_scalars = parse_field<std::size_t>(f[5], path, line_no);
    r.downlink_scalars = parse_field<std::size_t>(f[6], path, line_no);
    const int flag = parse_field<int>(f[7], path, line_no);
    if (flag != 0 && flag != 1) {
      throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) +
                        ": fallback must be 0 or 1");
    }
    r.fallback = flag == 1;
    if (!records.empty() && r.round <= records.back().round) {
      throw FormatError("'" + path.string() + "' line " + std::to_string(line_no) +
                        ": rounds must be strictly increasing");
    }
    records.push_back(r);
  }
  return records;
}

}  // namespace fagh
