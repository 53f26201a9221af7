#include "aba/csv.hpp"

#include <charconv>
#include <cmath>

#include "aba/error.hpp"

namespace aba::csv {

std::string_view trim(std::string_view s) noexcept {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split(std::string_view line, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        const auto field = line.substr(start, pos == std::string_view::npos ? pos : pos - start);
        out.emplace_back(trim(field));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

Reader::Reader(std::istream& in) : in_(in) {
    std::vector<std::string> fields;
    if (next(fields)) header_ = std::move(fields);
}

std::optional<std::size_t> Reader::find_column(std::string_view name) const {
    for (std::size_t i = 0; i < header_.size(); ++i)
        if (header_[i] == name) return i;
    return std::nullopt;
}

std::size_t Reader::column(std::string_view name) const {
    if (auto idx = find_column(name)) return *idx;
    throw ParseError("missing column '" + std::string(name) + "'", 1);
}

bool Reader::next(std::vector<std::string>& fields) {
    std::string raw;
    while (std::getline(in_, raw)) {
        ++line_;
        const auto t = trim(raw);
        if (t.empty() || t.front() == '#') continue;
        fields = split(t);
        return true;
    }
    return false;
}

double to_double(std::string_view s, std::size_t line) {
    s = trim(s);
    double v = 0.0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty())
        throw ParseError("not a number: '" + std::string(s) + "'", line);
    return v;
}

long long to_int(std::string_view s, std::size_t line) {
    s = trim(s);
    long long v = 0;
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || ptr != end || s.empty())
        throw ParseError("not an integer: '" + std::string(s) + "'", line);
    return v;
}

std::optional<double> to_optional_double(std::string_view s, std::size_t line) {
    s = trim(s);
    if (s.empty() || s == "NA" || s == "nan") return std::nullopt;
    return to_double(s, line);
}

std::string format(double x) {
    if (std::isnan(x)) return "NA";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

}  // namespace aba::csv
