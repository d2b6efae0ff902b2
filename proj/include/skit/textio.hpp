#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace skit {

// Raised by all file parsers; carries the 1-based line number of the offending record.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& file, int line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what),
          file_(file), line_(line) {}

    const std::string& file() const { return file_; }
    int line() const { return line_; }

private:
    std::string file_;
    int line_;
};

// One non-empty, non-comment line of a sectioned text file.
struct TextLine {
    int number = 0;          // 1-based line number in the source file
    std::string section;     // active [section] name, empty before the first header
    std::string text;        // trimmed content
};

// Splits a file into trimmed lines with their [section] context.
// '#' starts a comment; blank lines are skipped.
std::vector<TextLine> read_sectioned_file(const std::string& path);
std::vector<TextLine> parse_sectioned_text(const std::string& content, const std::string& name);

std::vector<std::string> split_ws(const std::string& s);

// "key = value" split; returns false when the line has no '='.
bool split_key_value(const std::string& line, std::string& key, std::string& value);

double parse_double(const std::string& tok, const TextLine& ln, const std::string& file);
long long parse_int(const std::string& tok, const TextLine& ln, const std::string& file);

// Fixed-format float for reproducible report files.
std::string fmt_double(double v, int precision = 9);

} // namespace skit
