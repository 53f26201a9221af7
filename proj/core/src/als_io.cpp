#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "aba/als.hpp"
#include "aba/csv.hpp"
#include "aba/error.hpp"

namespace aba::als {

namespace {

constexpr std::array<char, 4> kMagic{'F', 'E', 'M', '1'};

static_assert(std::endian::native == std::endian::little, "binary echo IO assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw ParseError("truncated binary echo file", 0);
    return v;
}

std::uint8_t to_u8(std::string_view s, std::size_t line) {
    const auto v = csv::to_int(s, line);
    if (v < 0 || v > 255) throw ParseError("value out of u8 range", line);
    return static_cast<std::uint8_t>(v);
}

}  // namespace

std::vector<Echo> read_echoes_csv(std::istream& in) {
    csv::Reader reader(in);
    if (!reader.has_header()) throw ParseError("echo file has no header", 1);
    const auto cx = reader.column("x"), cy = reader.column("y"), cz = reader.column("z");
    const auto crn = reader.column("return_number"), cnr = reader.column("num_returns");
    const auto ccl = reader.column("classification");
    const std::size_t width = reader.header().size();
    std::vector<Echo> out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const auto line = reader.line();
        if (f.size() != width) throw ParseError("wrong column count", line);
        Echo e;
        e.x = csv::to_double(f[cx], line);
        e.y = csv::to_double(f[cy], line);
        e.z = csv::to_double(f[cz], line);
        e.return_number = to_u8(f[crn], line);
        e.num_returns = to_u8(f[cnr], line);
        e.classification = to_u8(f[ccl], line);
        if (e.return_number < 1 || e.num_returns < 1 || e.return_number > e.num_returns)
            throw ParseError("return_number must lie in [1, num_returns]", line);
        out.push_back(e);
    }
    return out;
}

void write_echoes_csv(std::ostream& out, std::span<const Echo> echoes) {
    out << "x,y,z,return_number,num_returns,classification\n";
    for (const Echo& e : echoes)
        out << csv::format(e.x) << ',' << csv::format(e.y) << ',' << csv::format(e.z) << ','
            << int(e.return_number) << ',' << int(e.num_returns) << ',' << int(e.classification) << '\n';
}

std::vector<Echo> read_echoes_binary(std::istream& in) {
    std::array<char, 4> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw ParseError("missing FEM1 magic", 0);
    const auto count = take<std::uint64_t>(in);
    std::vector<Echo> out;
    out.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(count, 1u << 24)));
    for (std::uint64_t i = 0; i < count; ++i) {
        Echo e;
        e.x = take<double>(in);
        e.y = take<double>(in);
        e.z = take<double>(in);
        e.return_number = take<std::uint8_t>(in);
        e.num_returns = take<std::uint8_t>(in);
        e.classification = take<std::uint8_t>(in);
        out.push_back(e);
    }
    return out;
}

void write_echoes_binary(std::ostream& out, std::span<const Echo> echoes) {
    out.write(kMagic.data(), kMagic.size());
    put<std::uint64_t>(out, echoes.size());
    for (const Echo& e : echoes) {
        put(out, e.x);
        put(out, e.y);
        put(out, e.z);
        put(out, e.return_number);
        put(out, e.num_returns);
        put(out, e.classification);
    }
}

std::vector<Echo> read_echoes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open echo file " + path, 0);
    std::array<char, 4> head{};
    in.read(head.data(), head.size());
    const bool binary = in.gcount() == 4 && head == kMagic;
    in.clear();
    in.seekg(0);
    return binary ? read_echoes_binary(in) : read_echoes_csv(in);
}

TerrainRaster read_esri_ascii(std::istream& in) {
    TerrainRaster r;
    bool have_x = false, have_y = false, have_cs = false;
    bool x_center = false, y_center = false;
    std::size_t line = 0;
    std::string key;
    // Header: six key/value lines, NODATA_value optional.
    while (in >> std::ws && std::isalpha(in.peek())) {
        ++line;
        std::string value;
        in >> key >> value;
        for (auto& ch : key) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        const double v = csv::to_double(value, line);
        if (key == "ncols") r.ncols = static_cast<std::size_t>(v);
        else if (key == "nrows") r.nrows = static_cast<std::size_t>(v);
        else if (key == "xllcorner") { r.x_ll = v; have_x = true; }
        else if (key == "yllcorner") { r.y_ll = v; have_y = true; }
        else if (key == "xllcenter") { r.x_ll = v; have_x = x_center = true; }
        else if (key == "yllcenter") { r.y_ll = v; have_y = y_center = true; }
        else if (key == "cellsize") { r.cell_size = v; have_cs = true; }
        else if (key == "nodata_value") r.nodata = v;
        else throw ParseError("unknown ESRI grid key '" + key + "'", line);
    }
    if (!have_x || !have_y || !have_cs || r.ncols == 0 || r.nrows == 0)
        throw ParseError("incomplete ESRI grid header", line);
    if (!(r.cell_size > 0.0)) throw ParseError("cellsize must be positive", line);
    if (x_center) r.x_ll -= r.cell_size / 2.0;
    if (y_center) r.y_ll -= r.cell_size / 2.0;
    r.elevation.resize(r.ncols * r.nrows);
    std::string token;
    for (std::size_t i = 0; i < r.elevation.size(); ++i) {
        if (!(in >> token)) throw ParseError("ESRI grid has fewer cells than ncols*nrows", line + 1 + i / r.ncols);
        r.elevation[i] = csv::to_double(token, line + 1 + i / r.ncols);
    }
    return r;
}

void write_esri_ascii(std::ostream& out, const TerrainRaster& r) {
    out << "ncols " << r.ncols << "\nnrows " << r.nrows << "\nxllcorner " << csv::format(r.x_ll) << "\nyllcorner "
        << csv::format(r.y_ll) << "\ncellsize " << csv::format(r.cell_size) << "\nNODATA_value "
        << csv::format(r.nodata) << '\n';
    for (std::size_t row = 0; row < r.nrows; ++row) {
        for (std::size_t col = 0; col < r.ncols; ++col) out << (col ? " " : "") << csv::format(r.at(row, col));
        out << '\n';
    }
}

void write_metrics_csv(std::ostream& out, std::span<const UnitMetrics> rows) {
    out << "unit_id,hmean,hvar,h10,h25,h50,h75,h95,d2,time_diff,n_first_echoes,status\n";
    for (const auto& row : rows) {
        out << row.unit_id;
        if (!row.metrics) {
            out << ",NA,NA,NA,NA,NA,NA,NA,NA,NA,0,no_first_echoes\n";
            continue;
        }
        const auto& m = *row.metrics;
        out << ',' << csv::format(m.hmean) << ',' << csv::format(m.hvar) << ',' << csv::format(m.h10) << ','
            << csv::format(m.h25) << ',' << csv::format(m.h50) << ',' << csv::format(m.h75) << ','
            << csv::format(m.h95) << ',' << csv::format(m.d2) << ',' << m.time_diff << ',' << m.n_first_echoes
            << ',' << (m.low_count ? "low_count" : "ok") << '\n';
    }
}

std::vector<UnitMetrics> read_metrics_csv(std::istream& in) {
    csv::Reader reader(in);
    if (!reader.has_header()) throw ParseError("metrics file has no header", 1);
    const auto c_id = reader.column("unit_id");
    std::vector<std::pair<std::string_view, std::size_t>> cols;
    for (auto name : kMetricNames)
        if (auto c = reader.find_column(name)) cols.emplace_back(name, *c);
    const auto c_n = reader.find_column("n_first_echoes");
    const auto c_status = reader.find_column("status");
    std::vector<UnitMetrics> out;
    std::vector<std::string> f;
    while (reader.next(f)) {
        const auto line = reader.line();
        if (f.size() != reader.header().size()) throw ParseError("wrong column count", line);
        UnitMetrics um;
        um.unit_id = f[c_id];
        const bool missing = c_status && f[*c_status] == "no_first_echoes";
        if (!missing) {
            MetricsVector m;
            for (auto [name, c] : cols) set_metric(m, name, csv::to_double(f[c], line));
            if (c_n) m.n_first_echoes = static_cast<std::size_t>(csv::to_int(f[*c_n], line));
            m.low_count = c_status && f[*c_status] == "low_count";
            um.metrics = m;
        }
        out.push_back(std::move(um));
    }
    return out;
}

}  // namespace aba::als
