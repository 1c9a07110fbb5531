#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "powersched/errors.hpp"

namespace powersched {

// Locale-independent number rendering, 12 significant digits: enough to
// make emitted tables reproducible bit-for-bit across machines.
inline std::string format_number(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
    if (res.ec != std::errc{}) throw ConfigError("format_number: conversion failed");
    return std::string(buf, res.ptr);
}

inline std::string format_number(int v) { return std::to_string(v); }
inline std::string format_number(std::uint64_t v) { return std::to_string(v); }

// Write-then-rename so readers never observe a half-written file.
inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot open for writing: " + tmp.string());
        out << content;
        if (!out.flush()) throw ConfigError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw ConfigError("rename failed: " + path.string() + ": " + ec.message());
}

struct CsvTable {
    std::string header;  // comma-separated column names, no trailing newline
    std::vector<std::vector<std::string>> rows;

    std::string render() const {
        std::string out = header;
        out.push_back('\n');
        for (const auto& row : rows) {
            for (std::size_t i = 0; i < row.size(); ++i) {
                if (i) out.push_back(',');
                out += row[i];
            }
            out.push_back('\n');
        }
        return out;
    }
};

inline void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    write_text_atomic(path, table.render());
}

}  // namespace powersched
