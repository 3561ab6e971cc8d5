#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace rdlab {

// Shortest round-trip decimal form; "nan", "inf", "-inf" for non-finite values.
std::string format_number(double x);

// Writes through `path`.tmp and renames, so readers never see partial files.
void atomic_write(const std::filesystem::path& path, const std::string& content);

class csv_table {
public:
    explicit csv_table(std::vector<std::string> header);

    csv_table& row(const std::vector<double>& values);
    // Cells already formatted; used for mixed text columns.
    csv_table& row_text(const std::vector<std::string>& cells);

    std::size_t columns() const { return header_.size(); }
    std::size_t rows() const { return rows_.size(); }
    std::string str() const;
    void write(const std::filesystem::path& path) const { atomic_write(path, str()); }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct plot_series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    bool markers = false;
};

struct plot_style {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    bool log_y = false;
    std::string annotation;    // e.g. a fitted slope
};

// Self-contained SVG line/scatter plot. Non-positive values are dropped on
// log axes. Throws config_error when every series is empty.
std::string plot_svg(const std::vector<plot_series>& series, const plot_style& style);

struct warning_entry {
    std::string check;
    std::string message;
};

struct run_manifest {
    std::string subcommand;
    std::string config_hash;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    nlohmann::json config;
    nlohmann::json constants = nlohmann::json::object();
    nlohmann::json results = nlohmann::json::object();
    std::vector<std::pair<std::string, double>> timings;
    std::vector<warning_entry> warnings;
    std::vector<std::string> outputs;
    int exit_code = 0;

    void warn(std::string check, std::string message) { warnings.push_back({std::move(check), std::move(message)}); }
    nlohmann::json to_json() const;
};

extern const char* const tool_version;

} // namespace rdlab
