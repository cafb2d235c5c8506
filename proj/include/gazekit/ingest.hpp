#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazekit/types.hpp"

namespace gazekit {

enum class TableFormat { csv, tsv, jsonl, other };

const char* to_string(TableFormat format);

struct Dialect {
    char delimiter = ',';
    char quotechar = '"';
    std::optional<char> escapechar;
    char decimal = '.';
    std::optional<char> thousands;
    int header_row_index = -1;

    bool operator==(const Dialect&) const = default;
};

struct ColumnSchema {
    std::string name;
    std::string type_guess;  // string|int|float|bool|date|datetime|categorical
    std::vector<std::string> examples;
    bool nullable = false;

    bool operator==(const ColumnSchema&) const = default;
};

/// Structural description of a raw tabular file. Serializes to the strict
/// JSON contract used by the inference prompt, so the deterministic sniffer
/// and the provider-backed path produce interchangeable results.
struct SchemaDescription {
    TableFormat format = TableFormat::other;
    std::string encoding_guess = "utf-8";
    Dialect dialect;
    std::vector<ColumnSchema> columns;
    bool has_header = false;
    std::string row_count_estimate = "unknown";
    std::vector<std::string> missing_values_patterns;
    std::vector<std::string> notes;

    bool operator==(const SchemaDescription&) const = default;
};

/// Offline structure inference over (at most) the first sample_chars bytes:
/// dialect detection, header detection, per-column type guessing with up to
/// three example values. Throws UnreadableInput when the bytes cannot be
/// read as any supported tabular text.
SchemaDescription sniff_schema(std::string_view raw_bytes, std::size_t sample_chars);

nlohmann::ordered_json schema_to_json(const SchemaDescription& schema);

/// Parses and validates a schema JSON against the contract; throws
/// SchemaValidationFailed naming the first violated field.
SchemaDescription schema_from_json(const nlohmann::json& j);

struct TimeUnitGuess {
    TimeUnits unit = TimeUnits::s;
    bool ambiguous = false;
};

/// Chooses the time unit from the median positive inter-sample delta d:
/// d < 0.1 -> s, d < 100 -> ms, d < 1e5 -> us, otherwise ns. The guess is
/// flagged ambiguous when d lies within a factor of two of a band boundary.
/// Throws NoPositiveDeltas when no positive delta exists.
TimeUnitGuess detect_time_units(std::span<const double> timestamps);

/// Divide raw timestamps by this to obtain seconds.
double time_unit_divisor(TimeUnits unit);

/// Raw parsed table: column names plus rows of unparsed string cells.
struct RawTable {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

/// Materializes the rows the schema describes (delimited text or JSONL).
RawTable parse_table(std::string_view raw_bytes, const SchemaDescription& schema);

struct ColumnMapping {
    std::string time_col;
    std::string x_col;
    std::string y_col;
    std::optional<std::string> label_col;
    std::vector<std::string> drop_cols;
};

/// Picks time/x/y (and label/confidence when present) by column name, falling
/// back to the first numeric columns in order.
ColumnMapping infer_mapping(const SchemaDescription& schema);

struct CleanOptions {
    std::optional<double> min_confidence;         // off by default
    std::optional<std::string> confidence_col;
};

struct CleanReport {
    std::size_t input_rows = 0;
    std::size_t kept = 0;
    std::size_t dropped_missing = 0;       // missing or unparseable t/x/y
    std::size_t dropped_nonfinite = 0;
    std::size_t dropped_low_confidence = 0;
    TimeUnits time_units = TimeUnits::s;
    bool time_units_ambiguous = false;
};

struct CleanResult {
    GazeRecording recording;
    std::optional<std::vector<std::string>> truth_labels;  // raw, per kept sample
    CleanReport report;
};

/// Drops rows with missing/unparseable/non-finite coordinates, sorts stably
/// by timestamp, and normalizes time to seconds. Coordinates are passed
/// through untouched (unit conversion happens downstream). Throws
/// EmptyAfterCleaning when nothing survives.
CleanResult clean(const RawTable& table, const ColumnMapping& mapping,
                  const SchemaDescription& schema, const CleanOptions& options = {});

nlohmann::ordered_json clean_report_to_json(const CleanReport& report);

// --- file helpers --------------------------------------------------------

/// File bytes decoded to UTF-8 (BOM stripped, latin1 fallback).
struct DecodedText {
    std::string text;
    std::string encoding_guess;
};

DecodedText read_text_file(const std::filesystem::path& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

void write_recording_csv(const std::filesystem::path& path, const GazeRecording& rec,
                         const std::optional<std::vector<std::string>>& truth_labels);
CleanResult read_recording_csv(const std::filesystem::path& path);

void write_labels_csv(const std::filesystem::path& path, const LabeledSeries& series);
LabeledSeries read_labels_csv(const std::filesystem::path& path);

}  // namespace gazekit
