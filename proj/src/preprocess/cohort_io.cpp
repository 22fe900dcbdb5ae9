#include "fedperi/preprocess/cohort_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "fedperi/common/errors.hpp"

namespace fedperi::preprocess {

void validate_record(const Record& r, const FeatureSchema& schema) {
  const std::string where = "record " + std::to_string(r.id) + ": ";
  if (r.continuous.size() != schema.continuous.size() || r.binary.size() != schema.binary.size() ||
      r.categorical.size() != schema.high_cardinality.size() ||
      r.timeseries.size() != schema.timeseries_channels.size())
    throw ContractError(where + "feature counts do not match the schema");
  if (r.subgroup.age_years < 18.0) throw ContractError(where + "age below 18");
  if (r.duration_minutes < 1) throw ContractError(where + "duration must be at least one minute");
  for (const auto& channel : r.timeseries)
    for (std::size_t i = 1; i < channel.size(); ++i)
      if (channel[i].minute <= channel[i - 1].minute)
        throw ContractError(where + "time-series minute offsets must be strictly increasing");
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

template <typename T>
T parse_number(std::string_view cell, const std::string& context) {
  T value{};
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
    throw FormatError(context + ": cannot parse '" + std::string(cell) + "'");
  return value;
}

bool parse_flag(std::string_view cell, const std::string& context) {
  if (cell == "1") return true;
  if (cell == "0") return false;
  throw FormatError(context + ": expected 0 or 1, got '" + std::string(cell) + "'");
}

std::vector<std::string> header_for(const FeatureSchema& schema) {
  std::vector<std::string> h = {"record_id", "site", "surgery_time", "duration_min",
                                "sex",       "race", "age_years"};
  for (const auto& f : schema.continuous) h.push_back(f.name);
  for (const auto& f : schema.binary) h.push_back(f);
  for (const auto& f : schema.high_cardinality) h.push_back(f.name);
  for (const auto& o : schema.outcomes) h.push_back(o);
  return h;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

void write_cohort(const Cohort& cohort, const FeatureSchema& schema, const std::string& tabular_path,
                  const std::string& timeseries_path) {
  std::ofstream tab(tabular_path);
  std::ofstream ts(timeseries_path);
  if (!tab) throw FormatError("cannot write " + tabular_path);
  if (!ts) throw FormatError("cannot write " + timeseries_path);

  const auto header = header_for(schema);
  for (std::size_t i = 0; i < header.size(); ++i) tab << (i ? "," : "") << header[i];
  tab << '\n';
  ts << "record_id,channel,minute,value\n";

  for (const Record& r : cohort) {
    validate_record(r, schema);
    if (r.site.find(',') != std::string::npos) throw FormatError("site name contains a comma");
    tab << r.id << ',' << r.site << ',' << r.surgery_time << ',' << r.duration_minutes << ','
        << (r.subgroup.sex == Sex::Female ? "F" : "M") << ','
        << (r.subgroup.race == Race::AfricanAmerican ? "AA" : "non-AA") << ','
        << format_double(r.subgroup.age_years);
    for (const auto& v : r.continuous) tab << ',' << (v ? format_double(*v) : "");
    for (const auto& v : r.binary) tab << ',' << (v ? (*v ? "1" : "0") : "");
    for (const auto& v : r.categorical) tab << ',' << (v ? *v : "");
    for (bool y : r.labels) tab << ',' << (y ? '1' : '0');
    tab << '\n';
    for (std::size_t c = 0; c < r.timeseries.size(); ++c)
      for (const TimePoint& p : r.timeseries[c])
        ts << r.id << ',' << schema.timeseries_channels[c].name << ',' << p.minute << ','
           << format_double(p.value) << '\n';
  }
  if (!tab || !ts) throw FormatError("write failed for cohort files");
}

Cohort read_cohort(const FeatureSchema& schema, const std::string& tabular_path,
                   const std::string& timeseries_path) {
  std::ifstream tab(tabular_path);
  if (!tab) throw FormatError("cannot read " + tabular_path);
  std::string line;
  if (!std::getline(tab, line)) throw FormatError(tabular_path + ": empty file");
  strip_cr(line);
  const auto header = header_for(schema);
  {
    const auto cells = split_line(line);
    if (cells.size() != header.size()) throw FormatError(tabular_path + ": header does not match schema");
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (cells[i] != header[i])
        throw FormatError(tabular_path + ": expected column '" + header[i] + "', found '" +
                          std::string(cells[i]) + "'");
  }

  const std::size_t nc = schema.continuous.size(), nb = schema.binary.size(),
                    nk = schema.high_cardinality.size(), nch = schema.timeseries_channels.size();
  Cohort cohort;
  std::unordered_map<std::int64_t, std::size_t> index;
  std::size_t line_no = 1;
  while (std::getline(tab, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const std::string ctx = tabular_path + ":" + std::to_string(line_no);
    const auto cells = split_line(line);
    if (cells.size() != header.size()) throw FormatError(ctx + ": wrong number of cells");
    Record r;
    r.id = parse_number<std::int64_t>(cells[0], ctx);
    r.site = std::string(cells[1]);
    r.surgery_time = parse_number<std::int64_t>(cells[2], ctx);
    r.duration_minutes = parse_number<int>(cells[3], ctx);
    if (cells[4] == "F")
      r.subgroup.sex = Sex::Female;
    else if (cells[4] == "M")
      r.subgroup.sex = Sex::Male;
    else
      throw FormatError(ctx + ": sex must be F or M");
    if (cells[5] == "AA")
      r.subgroup.race = Race::AfricanAmerican;
    else if (cells[5] == "non-AA")
      r.subgroup.race = Race::NonAfricanAmerican;
    else
      throw FormatError(ctx + ": race must be AA or non-AA");
    r.subgroup.age_years = parse_number<double>(cells[6], ctx);
    std::size_t col = 7;
    for (std::size_t i = 0; i < nc; ++i, ++col)
      r.continuous.push_back(cells[col].empty() ? std::nullopt
                                                : std::optional<double>(parse_number<double>(cells[col], ctx)));
    for (std::size_t i = 0; i < nb; ++i, ++col)
      r.binary.push_back(cells[col].empty() ? std::nullopt : std::optional<bool>(parse_flag(cells[col], ctx)));
    for (std::size_t i = 0; i < nk; ++i, ++col)
      r.categorical.push_back(cells[col].empty() ? std::nullopt : std::optional<std::string>(cells[col]));
    for (std::size_t k = 0; k < kNumOutcomes; ++k, ++col) r.labels[k] = parse_flag(cells[col], ctx);
    r.timeseries.resize(nch);
    if (!index.emplace(r.id, cohort.size()).second)
      throw FormatError(ctx + ": duplicate record_id " + std::to_string(r.id));
    cohort.push_back(std::move(r));
  }

  std::unordered_map<std::string, std::size_t> channel_index;
  for (std::size_t c = 0; c < nch; ++c) channel_index.emplace(schema.timeseries_channels[c].name, c);

  std::ifstream ts(timeseries_path);
  if (!ts) throw FormatError("cannot read " + timeseries_path);
  if (!std::getline(ts, line)) throw FormatError(timeseries_path + ": empty file");
  line_no = 1;
  while (std::getline(ts, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const std::string ctx = timeseries_path + ":" + std::to_string(line_no);
    const auto cells = split_line(line);
    if (cells.size() != 4) throw FormatError(ctx + ": expected 4 cells");
    const auto id = parse_number<std::int64_t>(cells[0], ctx);
    auto rec = index.find(id);
    if (rec == index.end()) throw FormatError(ctx + ": unknown record_id " + std::to_string(id));
    auto ch = channel_index.find(std::string(cells[1]));
    if (ch == channel_index.end()) throw FormatError(ctx + ": unknown channel " + std::string(cells[1]));
    cohort[rec->second].timeseries[ch->second].push_back(
        {parse_number<int>(cells[2], ctx), parse_number<double>(cells[3], ctx)});
  }
  for (const Record& r : cohort) validate_record(r, schema);
  return cohort;
}

}  // namespace fedperi::preprocess
