#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace aba::csv {

// Minimal comma-separated reader: no quoting, '#' lines are skipped,
// surrounding whitespace is trimmed from every field.
class Reader {
public:
    explicit Reader(std::istream& in);

    const std::vector<std::string>& header() const noexcept { return header_; }
    bool has_header() const noexcept { return !header_.empty(); }

    // Index of `name` in the header; throws ParseError when absent.
    std::size_t column(std::string_view name) const;
    std::optional<std::size_t> find_column(std::string_view name) const;

    // False at end of input. `fields` receives the split row.
    bool next(std::vector<std::string>& fields);
    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    std::vector<std::string> header_;
    std::size_t line_ = 0;
};

std::vector<std::string> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s) noexcept;

// Strict conversions; throw ParseError tagged with `line`.
double to_double(std::string_view s, std::size_t line);
long long to_int(std::string_view s, std::size_t line);
std::optional<double> to_optional_double(std::string_view s, std::size_t line);

// Shortest representation that parses back to the same double.
std::string format(double x);

}  // namespace aba::csv
