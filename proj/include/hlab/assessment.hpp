#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hlab {

/// Pre/post test percentages for one student.
struct ScoreRecord {
    std::string student;
    std::string group;
    double test2 = 0.0;
    double test3 = 0.0;
    std::size_t line = 0; ///< source line, 0 when not from a file
};

class UndefinedGainError : public std::domain_error {
public:
    UndefinedGainError()
        : std::domain_error("normalized gain undefined for a pre-test score of 100")
    {
    }
};

class EmptyGroupError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EmptyInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct LineDiagnostic {
    std::size_t line = 0;
    std::string message;
};

/// All per-line problems of a rejected score file.
class ScoreParseError : public std::runtime_error {
public:
    explicit ScoreParseError(std::vector<LineDiagnostic> diagnostics);
    [[nodiscard]] const std::vector<LineDiagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<LineDiagnostic> diagnostics_;
};

/// (test3 - test2) / (100 - test2). Throws UndefinedGainError when
/// test2 == 100 and std::invalid_argument outside [0, 100].
double normalized_gain(double test2, double test3);

enum class Aggregation {
    PerStudent, ///< mean of the individual gains
    GroupMean   ///< gain of the group's mean scores
};

std::string to_string(Aggregation agg);
Aggregation aggregation_from_string(const std::string& name);

struct GainReport {
    std::string group;
    Aggregation aggregation = Aggregation::PerStudent;
    std::size_t n = 0;                  ///< students contributing
    std::optional<double> mean_gain;    ///< empty when every student was excluded
    std::vector<double> gains;          ///< per student, in input order
    std::vector<std::string> excluded;  ///< ceiling students (test2 == 100)
};

/// One report per group, groups in order of first appearance. Throws
/// EmptyGroupError when `records` is empty.
std::vector<GainReport> group_gain(const std::vector<ScoreRecord>& records,
                                   Aggregation aggregation = Aggregation::PerStudent);

/// Reads `student,group,test2,test3` CSV. Rejects the whole input on any bad
/// row (ScoreParseError listing every line), and an input without data rows
/// with EmptyInputError.
std::vector<ScoreRecord> load_scores(std::istream& in);

} // namespace hlab
