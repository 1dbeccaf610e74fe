#pragma once

// Dense N-way contingency tables over binary variables.
//
// Cells are stored in a flat array indexed lexicographically by level
// combination in schema order: the first variable is the most significant
// bit, the last variable varies fastest. With k variables the table holds
// 2^k cells; k is capped at kMaxVariables.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccgm/error.hpp"

namespace ccgm {

inline constexpr std::size_t kMaxVariables = 24;

/// Ordered list of named binary variables. Order is significant.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<std::string> names);

  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }
  std::size_t cell_count() const { return std::size_t{1} << names_.size(); }

  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Position of `name`; throws DataError when absent.
  std::size_t position(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name).has_value(); }

  /// Bit of variable `pos` inside a flat cell index.
  std::size_t bit(std::size_t pos) const { return names_.size() - 1 - pos; }
  int level(std::size_t cell, std::size_t pos) const {
    return static_cast<int>((cell >> bit(pos)) & 1U);
  }

  /// Sub-schema holding `keep` in this schema's order. Unknown names throw.
  Schema subset(std::span<const std::string> keep) const;
  /// Names of this schema that are not in `drop`, in schema order.
  std::vector<std::string> without(std::span<const std::string> drop) const;

  friend bool operator==(const Schema&, const Schema&) = default;

 private:
  std::vector<std::string> names_;
};

/// Assignment of levels to a subset of variables.
using CellAddress = std::map<std::string, int, std::less<>>;

/// Parses "L=1,R=0" into an address. Throws DataError on duplicates or
/// levels other than 0/1.
CellAddress parse_address(std::string_view text);
std::string format_address(const CellAddress& address);

/// Nonnegative real counts over all level combinations of a schema.
class ContingencyTable {
 public:
  enum class ZeroTotal { reject, allow };

  ContingencyTable() = default;
  ContingencyTable(Schema schema, std::vector<double> counts,
                   ZeroTotal policy = ZeroTotal::reject);

  const Schema& schema() const { return schema_; }
  std::span<const double> counts() const { return counts_; }
  double operator[](std::size_t cell) const { return counts_[cell]; }
  std::size_t size() const { return counts_.size(); }

  double total() const;
  /// True for a conditional slice that selected no mass.
  bool zero_total() const { return zero_total_; }

  /// Flat index of a full address.
  std::size_t index_of(const CellAddress& address) const;
  /// Full address of a flat index.
  CellAddress address_of(std::size_t cell) const;

  friend bool operator==(const ContingencyTable& a, const ContingencyTable& b) {
    return a.schema_ == b.schema_ && a.counts_ == b.counts_;
  }

 private:
  Schema schema_;
  std::vector<double> counts_;
  bool zero_total_ = false;
};

/// Reads the cell-CSV format: header of variable names followed by `count`,
/// one row per full address, levels `0`/`1`. Unlisted cells are zero.
ContingencyTable ingest(std::istream& in);
ContingencyTable ingest_file(const std::string& path);
ContingencyTable ingest_string(std::string_view text);

/// Writes the cell-CSV format with every cell listed in lexicographic order.
/// Counts use the shortest round-trip decimal representation.
void emit(const ContingencyTable& t, std::ostream& out);
std::string emit_string(const ContingencyTable& t);

/// Sums out every variable not in `keep`. Result keeps schema order.
ContingencyTable marginalize(const ContingencyTable& t,
                             std::span<const std::string> keep);
ContingencyTable marginalize(const ContingencyTable& t,
                             std::initializer_list<std::string> keep);

/// Restricts to cells matching `on` and drops the fixed variables. A slice
/// with no mass is returned with zero_total() set.
ContingencyTable condition(const ContingencyTable& t, const CellAddress& on);

/// Stored count at a full address.
double cell(const ContingencyTable& t, const CellAddress& at);

/// Every level combination of `vars` (taken in schema order), the last
/// variable varying fastest. Empty `vars` yields one empty address.
std::vector<CellAddress> strata(const Schema& schema, std::span<const std::string> vars);

/// Projection of every cell of `from` onto the sub-schema holding `keep`:
/// entry i is the flat index in the marginal table of cell i.
std::vector<std::uint32_t> projection_index(const Schema& from,
                                            const Schema& keep);

}  // namespace ccgm
