#include "sogclr/metrics.hpp"

#include <cmath>

#include <json.hpp>

#include "sogclr/errors.hpp"
#include "sogclr/text_io.hpp"

namespace sogclr {

namespace {

constexpr const char* kHeader = "step,objective_value,oracle_grad_norm_sq,u_tracking_mse,eps_sq_mean,wall_clock_ms";

struct Column {
  const char* name;
  std::optional<double> MetricsRecord::*member;
};

constexpr Column kOptional[] = {
    {"objective_value", &MetricsRecord::objective_value},
    {"oracle_grad_norm_sq", &MetricsRecord::oracle_grad_norm_sq},
    {"u_tracking_mse", &MetricsRecord::u_tracking_mse},
    {"eps_sq_mean", &MetricsRecord::eps_sq_mean},
};

std::vector<std::string_view> lines_of(std::string_view body) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < body.size()) {
    const auto end = std::min(body.find('\n', pos), body.size());
    out.push_back(body.substr(pos, end - pos));
    pos = end + 1;
  }
  return out;
}

}  // namespace

std::string format_metrics(const std::vector<MetricsRecord>& records, MetricsFormat format) {
  using text::format_double;
  std::string out;
  if (format == MetricsFormat::csv) {
    out += kHeader;
    out += '\n';
    for (const auto& r : records) {
      out += std::to_string(r.step);
      for (const auto& c : kOptional) {
        out += ',';
        if (const auto& v = r.*c.member) out += format_double(*v);
      }
      out += ',';
      out += format_double(r.wall_clock_ms);
      out += '\n';
    }
    return out;
  }
  for (const auto& r : records) {
    out += "{\"step\":" + std::to_string(r.step);
    for (const auto& c : kOptional) {
      if (const auto& v = r.*c.member) {
        if (!std::isfinite(*v)) fail(ErrorKind::numeric, std::string(c.name) + " is not finite; JSONL cannot hold it");
        out += ",\"" + std::string(c.name) + "\":" + format_double(*v);
      }
    }
    out += ",\"wall_clock_ms\":" + format_double(r.wall_clock_ms) + "}\n";
  }
  return out;
}

std::vector<MetricsRecord> parse_metrics(std::string_view body, MetricsFormat format) {
  std::vector<MetricsRecord> records;
  const auto lines = lines_of(body);
  if (format == MetricsFormat::csv) {
    if (lines.empty() || text::trim(lines.front()) != kHeader) {
      fail(ErrorKind::io, "metrics CSV header does not match '" + std::string(kHeader) + "'");
    }
    for (std::size_t l = 1; l < lines.size(); ++l) {
      const auto line = text::trim(lines[l]);
      if (line.empty()) continue;
      const auto cells = text::split(line, ',');
      if (cells.size() != 6) fail(ErrorKind::io, "metrics CSV line " + std::to_string(l + 1) + ": expected 6 fields");
      MetricsRecord r;
      r.step = text::parse_int(cells[0]);
      for (std::size_t c = 0; c < 4; ++c) {
        const auto cell = text::trim(cells[c + 1]);
        if (!cell.empty()) r.*kOptional[c].member = text::parse_double(cell);
      }
      r.wall_clock_ms = text::parse_double(cells[5]);
      records.push_back(r);
    }
    return records;
  }
  for (std::size_t l = 0; l < lines.size(); ++l) {
    const auto line = text::trim(lines[l]);
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::io, "metrics JSONL line " + std::to_string(l + 1) + ": " + e.what());
    }
    MetricsRecord r;
    r.step = j.at("step").get<long long>();
    for (const auto& c : kOptional) {
      if (j.contains(c.name)) r.*c.member = j.at(c.name).get<double>();
    }
    r.wall_clock_ms = j.value("wall_clock_ms", 0.0);
    records.push_back(r);
  }
  return records;
}

void emit_metrics(const std::vector<MetricsRecord>& records, const std::filesystem::path& path, MetricsFormat format) {
  text::write_file(path, format_metrics(records, format));
}

std::vector<MetricsRecord> read_metrics(const std::filesystem::path& path, MetricsFormat format) {
  std::string body;
  for (const auto& line : text::read_lines(path)) {
    body += line;
    body += '\n';
  }
  return parse_metrics(body, format);
}

}  // namespace sogclr
