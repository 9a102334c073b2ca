#include "hlab/assessment.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

namespace hlab {

namespace {

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, ',')) {
        out.push_back(trim(field));
    }
    if (!line.empty() && line.back() == ',') {
        out.emplace_back();
    }
    return out;
}

std::optional<double> parse_percent(const std::string& text)
{
    double value = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (text.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

bool in_range(double v) { return v >= 0.0 && v <= 100.0; }

} // namespace

ScoreParseError::ScoreParseError(std::vector<LineDiagnostic> diagnostics)
    : std::runtime_error([&] {
        std::string msg = "score file rejected:";
        for (const auto& d : diagnostics) {
            msg += "\n  line " + std::to_string(d.line) + ": " + d.message;
        }
        return msg;
    }())
    , diagnostics_(std::move(diagnostics))
{
}

double normalized_gain(double test2, double test3)
{
    if (!in_range(test2) || !in_range(test3)) {
        throw std::invalid_argument("test scores must be percentages in [0, 100]");
    }
    if (test2 == 100.0) {
        throw UndefinedGainError();
    }
    return (test3 - test2) / (100.0 - test2);
}

std::string to_string(Aggregation agg) { return agg == Aggregation::PerStudent ? "per-student" : "group-mean"; }

Aggregation aggregation_from_string(const std::string& name)
{
    if (name == "per-student") {
        return Aggregation::PerStudent;
    }
    if (name == "group-mean") {
        return Aggregation::GroupMean;
    }
    throw std::invalid_argument("unknown aggregation: " + name + " (expected per-student or group-mean)");
}

std::vector<GainReport> group_gain(const std::vector<ScoreRecord>& records, Aggregation aggregation)
{
    if (records.empty()) {
        throw EmptyGroupError("no score records to aggregate");
    }

    std::vector<GainReport> reports;
    std::map<std::string, std::size_t> index;
    std::vector<std::pair<double, double>> sums; // test2, test3 of contributing students

    for (const auto& r : records) {
        auto [it, inserted] = index.try_emplace(r.group, reports.size());
        if (inserted) {
            GainReport report;
            report.group = r.group;
            report.aggregation = aggregation;
            reports.push_back(std::move(report));
            sums.emplace_back(0.0, 0.0);
        }
        GainReport& report = reports[it->second];
        if (r.test2 == 100.0) {
            report.excluded.push_back(r.student);
            continue;
        }
        report.gains.push_back(normalized_gain(r.test2, r.test3));
        sums[it->second].first += r.test2;
        sums[it->second].second += r.test3;
    }

    for (std::size_t i = 0; i < reports.size(); ++i) {
        GainReport& report = reports[i];
        report.n = report.gains.size();
        if (report.n == 0) {
            continue;
        }
        const double n = static_cast<double>(report.n);
        if (aggregation == Aggregation::PerStudent) {
            report.mean_gain = std::accumulate(report.gains.begin(), report.gains.end(), 0.0) / n;
        } else {
            report.mean_gain = normalized_gain(sums[i].first / n, sums[i].second / n);
        }
    }
    return reports;
}

std::vector<ScoreRecord> load_scores(std::istream& in)
{
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    std::vector<ScoreRecord> records;
    std::vector<LineDiagnostic> problems;

    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        const auto fields = split_csv_line(line);
        if (!have_header) {
            have_header = true;
            if (fields != std::vector<std::string>{"student", "group", "test2", "test3"}) {
                problems.push_back({line_no, "expected header student,group,test2,test3"});
            }
            continue;
        }
        if (fields.size() != 4) {
            problems.push_back({line_no, "expected 4 fields, found " + std::to_string(fields.size())});
            continue;
        }
        ScoreRecord r;
        r.student = fields[0];
        r.group = fields[1];
        r.line = line_no;
        bool ok = true;
        if (r.student.empty() || r.group.empty()) {
            problems.push_back({line_no, "student and group must be non-empty"});
            ok = false;
        }
        const auto t2 = parse_percent(fields[2]);
        const auto t3 = parse_percent(fields[3]);
        if (!t2 || !t3) {
            problems.push_back({line_no, "test2/test3 must be numbers"});
            ok = false;
        } else {
            if (!in_range(*t2)) {
                problems.push_back({line_no, "test2=" + fields[2] + " outside [0, 100]"});
                ok = false;
            }
            if (!in_range(*t3)) {
                problems.push_back({line_no, "test3=" + fields[3] + " outside [0, 100]"});
                ok = false;
            }
        }
        if (ok) {
            r.test2 = *t2;
            r.test3 = *t3;
            records.push_back(std::move(r));
        }
    }

    if (!problems.empty()) {
        throw ScoreParseError(std::move(problems));
    }
    if (records.empty()) {
        throw EmptyInputError(have_header ? "score file has a header but no rows" : "score file is empty");
    }
    return records;
}

} // namespace hlab
