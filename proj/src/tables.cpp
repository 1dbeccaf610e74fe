#include "ccgm/tables.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

#include "ccgm/kernels.hpp"

namespace ccgm {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(trim(line.substr(start, pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

int parse_level(std::string_view s) {
  if (s == "0") return 0;
  if (s == "1") return 1;
  throw DataError(fmt::format("unknown level label '{}' (expected 0 or 1)", s));
}

double parse_count(std::string_view s, std::size_t line_no) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || !std::isfinite(v)) {
    throw DataError(fmt::format("line {}: invalid count '{}'", line_no, s));
  }
  if (v < 0.0) throw DataError(fmt::format("line {}: negative count {}", line_no, s));
  return v;
}

}  // namespace

Schema::Schema(std::vector<std::string> names) : names_(std::move(names)) {
  if (names_.size() > kMaxVariables) {
    throw DataError(fmt::format("{} variables exceed the dense-table limit of {}",
                                names_.size(), kMaxVariables));
  }
  std::unordered_set<std::string_view> seen;
  for (const auto& n : names_) {
    if (n.empty()) throw DataError("variable names must be nonempty");
    if (!seen.insert(n).second) throw DataError(fmt::format("duplicate variable '{}'", n));
  }
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::position(std::string_view name) const {
  if (auto p = find(name)) return *p;
  throw DataError(fmt::format("unknown variable '{}'", name));
}

Schema Schema::subset(std::span<const std::string> keep) const {
  std::vector<bool> mask(names_.size(), false);
  for (const auto& k : keep) mask[position(k)] = true;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (mask[i]) out.push_back(names_[i]);
  }
  return Schema(std::move(out));
}

std::vector<std::string> Schema::without(std::span<const std::string> drop) const {
  std::vector<std::string> out;
  for (const auto& n : names_) {
    if (std::find(drop.begin(), drop.end(), n) == drop.end()) out.push_back(n);
  }
  return out;
}

CellAddress parse_address(std::string_view text) {
  CellAddress out;
  text = trim(text);
  if (text.empty()) return out;
  for (auto part : split(text, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string_view::npos) {
      throw DataError(fmt::format("malformed assignment '{}' (expected NAME=LEVEL)", part));
    }
    const auto name = trim(part.substr(0, eq));
    if (name.empty()) throw DataError(fmt::format("malformed assignment '{}'", part));
    const int level = parse_level(trim(part.substr(eq + 1)));
    if (!out.emplace(std::string(name), level).second) {
      throw DataError(fmt::format("variable '{}' assigned twice", name));
    }
  }
  return out;
}

std::string format_address(const CellAddress& address) {
  std::string out;
  for (const auto& [name, level] : address) {
    if (!out.empty()) out += ',';
    out += fmt::format("{}={}", name, level);
  }
  return out;
}

ContingencyTable::ContingencyTable(Schema schema, std::vector<double> counts,
                                   ZeroTotal policy)
    : schema_(std::move(schema)), counts_(std::move(counts)) {
  if (counts_.size() != schema_.cell_count()) {
    throw DataError(fmt::format("expected {} cells, got {}", schema_.cell_count(),
                                counts_.size()));
  }
  for (double c : counts_) {
    if (!(c >= 0.0) || !std::isfinite(c)) {
      throw DataError("counts must be finite and nonnegative");
    }
  }
  zero_total_ = total() <= 0.0;
  if (zero_total_ && policy == ZeroTotal::reject) {
    throw DataError("table total must be positive");
  }
}

double ContingencyTable::total() const { return kernels::sum(counts_); }

std::size_t ContingencyTable::index_of(const CellAddress& address) const {
  if (address.size() != schema_.size()) {
    throw DataError(fmt::format("address '{}' is not a full cell address",
                                format_address(address)));
  }
  std::size_t idx = 0;
  for (const auto& [name, level] : address) {
    const auto pos = schema_.position(name);
    if (level != 0 && level != 1) throw DataError("levels must be 0 or 1");
    idx |= static_cast<std::size_t>(level) << schema_.bit(pos);
  }
  return idx;
}

CellAddress ContingencyTable::address_of(std::size_t cell) const {
  CellAddress out;
  for (std::size_t p = 0; p < schema_.size(); ++p) out[schema_.name(p)] = schema_.level(cell, p);
  return out;
}

ContingencyTable ingest(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) throw DataError("no data rows");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  for (auto f : split(trim(line), ',')) header.emplace_back(f);
  if (header.size() < 2 || header.back() != "count") {
    throw DataError("header must list variables followed by 'count'");
  }
  header.pop_back();
  Schema schema(header);
  std::vector<double> counts(schema.cell_count(), 0.0);
  std::vector<bool> seen(schema.cell_count(), false);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto fields = split(body, ',');
    if (fields.size() != schema.size() + 1) {
      throw DataError(fmt::format("line {}: expected {} fields, got {}", line_no,
                                  schema.size() + 1, fields.size()));
    }
    std::size_t idx = 0;
    for (std::size_t p = 0; p < schema.size(); ++p) {
      int level = 0;
      try {
        level = parse_level(fields[p]);
      } catch (const DataError& e) {
        throw DataError(fmt::format("line {}: {}", line_no, e.what()));
      }
      idx |= static_cast<std::size_t>(level) << schema.bit(p);
    }
    if (seen[idx]) throw DataError(fmt::format("line {}: duplicate cell address", line_no));
    seen[idx] = true;
    counts[idx] = parse_count(fields.back(), line_no);
    ++rows;
  }
  if (rows == 0) throw DataError("no data rows");
  return ContingencyTable(std::move(schema), std::move(counts));
}

ContingencyTable ingest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path));
  return ingest(in);
}

ContingencyTable ingest_string(std::string_view text) {
  std::istringstream in{std::string(text)};
  return ingest(in);
}

void emit(const ContingencyTable& t, std::ostream& out) {
  const auto& s = t.schema();
  for (const auto& n : s.names()) out << n << ',';
  out << "count\n";
  char buf[64];
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t p = 0; p < s.size(); ++p) out << s.level(i, p) << ',';
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, t[i]);
    out.write(buf, end - buf);
    out << '\n';
  }
}

std::string emit_string(const ContingencyTable& t) {
  std::ostringstream out;
  emit(t, out);
  return out.str();
}

std::vector<std::uint32_t> projection_index(const Schema& from, const Schema& keep) {
  std::vector<std::size_t> src_bits;
  for (std::size_t q = 0; q < keep.size(); ++q) {
    src_bits.push_back(from.bit(from.position(keep.name(q))));
  }
  std::vector<std::uint32_t> idx(from.cell_count());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::uint32_t j = 0;
    for (std::size_t q = 0; q < src_bits.size(); ++q) {
      j |= static_cast<std::uint32_t>((i >> src_bits[q]) & 1U) << keep.bit(q);
    }
    idx[i] = j;
  }
  return idx;
}

ContingencyTable marginalize(const ContingencyTable& t, std::span<const std::string> keep) {
  if (keep.empty()) throw DataError("marginalize needs at least one variable to keep");
  Schema sub = t.schema().subset(keep);
  if (sub.size() != keep.size()) throw DataError("duplicate variable in keep set");
  std::vector<double> m(sub.cell_count(), 0.0);
  kernels::accumulate(t.counts(), projection_index(t.schema(), sub), m);
  return ContingencyTable(std::move(sub), std::move(m), ContingencyTable::ZeroTotal::allow);
}

ContingencyTable marginalize(const ContingencyTable& t, std::initializer_list<std::string> keep) {
  return marginalize(t, std::span<const std::string>(keep.begin(), keep.size()));
}

ContingencyTable condition(const ContingencyTable& t, const CellAddress& on) {
  if (on.empty()) return t;
  const auto& s = t.schema();
  std::size_t mask = 0, want = 0;
  std::vector<std::string> fixed;
  for (const auto& [name, level] : on) {
    const auto b = s.bit(s.position(name));
    if (level != 0 && level != 1) throw DataError("levels must be 0 or 1");
    mask |= std::size_t{1} << b;
    want |= static_cast<std::size_t>(level) << b;
    fixed.push_back(name);
  }
  auto rest_names = s.without(fixed);
  if (rest_names.empty()) throw DataError("conditioning on every variable leaves no table");
  Schema rest(std::move(rest_names));
  const auto proj = projection_index(s, rest);
  std::vector<double> out(rest.cell_count(), 0.0);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if ((i & mask) == want) out[proj[i]] = t[i];
  }
  return ContingencyTable(std::move(rest), std::move(out), ContingencyTable::ZeroTotal::allow);
}

double cell(const ContingencyTable& t, const CellAddress& at) { return t[t.index_of(at)]; }

std::vector<CellAddress> strata(const Schema& schema, std::span<const std::string> vars) {
  const Schema sub = schema.subset(vars);
  std::vector<CellAddress> out;
  out.reserve(sub.cell_count());
  for (std::size_t i = 0; i < sub.cell_count(); ++i) {
    CellAddress a;
    for (std::size_t p = 0; p < sub.size(); ++p) a[sub.name(p)] = sub.level(i, p);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace ccgm
