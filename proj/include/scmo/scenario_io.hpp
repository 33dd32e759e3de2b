#pragma once

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "scmo/errors.hpp"
#include "scmo/scenario.hpp"

namespace scmo {

/// Shortest decimal form that parses back to the same double.
[[nodiscard]] inline std::string format_double(double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, r.ptr);
}

[[nodiscard]] inline double parse_double(std::string_view s) {
    double v = 0.0;
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw IoError("cannot parse number '" + std::string(s) + "'");
    return v;
}

[[nodiscard]] inline long long parse_int(std::string_view s) {
    long long v = 0;
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw IoError("cannot parse integer '" + std::string(s) + "'");
    return v;
}

[[nodiscard]] inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            out.push_back(line.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

inline constexpr const char* kTruthHeader = "step,id,x,y,vx,vy";
inline constexpr const char* kFramesHeader = "step,x,y,provenance";

/// Truth rows: the sensor as id -1, then targets, ordered by step.
inline void write_truth_csv(std::ostream& os, const ScenarioTruth& t) {
    os << kTruthHeader << "\n";
    auto row = [&](std::size_t k, int id, const State4& x) {
        os << (k + 1) << ',' << id;
        for (int i = 0; i < 4; ++i) os << ',' << format_double(x(i));
        os << '\n';
    };
    for (std::size_t k = 0; k < t.steps(); ++k) {
        row(k, -1, t.sensor[k]);
        for (const auto& tr : t.targets)
            if (tr.alive(k)) row(k, tr.id, tr.at(k));
    }
}

inline void write_frames_csv(std::ostream& os, const std::vector<MeasurementFrame>& frames) {
    os << kFramesHeader << "\n";
    for (const auto& f : frames)
        for (std::size_t i = 0; i < f.measurements.size(); ++i)
            os << (f.step + 1) << ',' << format_double(f.measurements[i](0)) << ','
               << format_double(f.measurements[i](1)) << ',' << f.provenance[i] << '\n';
}

namespace detail {

template <typename Fn>
void for_each_row(std::istream& is, const char* header, std::size_t cols, Fn fn) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) throw IoError("unexpected header '" + line + "'");
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv(line);
        if (f.size() != cols) throw IoError("line " + std::to_string(lineno) + ": expected " + std::to_string(cols) +
                                            " columns");
        fn(f);
    }
}

} // namespace detail

[[nodiscard]] inline ScenarioTruth read_truth_csv(std::istream& is) {
    ScenarioTruth t;
    std::map<long long, std::size_t> slot;
    detail::for_each_row(is, kTruthHeader, 6, [&](const std::vector<std::string_view>& f) {
        const long long step = parse_int(f[0]);
        const long long id = parse_int(f[1]);
        if (step < 1) throw IoError("steps are numbered from 1");
        const auto k = static_cast<std::size_t>(step - 1);
        State4 x;
        for (int i = 0; i < 4; ++i) x(i) = parse_double(f[2 + i]);
        if (id == -1) {
            if (k != t.sensor.size()) throw IoError("sensor rows must cover consecutive steps");
            t.sensor.push_back(x);
            return;
        }
        auto it = slot.find(id);
        if (it == slot.end()) {
            TargetTrack tr;
            tr.id = static_cast<int>(id);
            tr.birth = k;
            t.targets.push_back(tr);
            it = slot.emplace(id, t.targets.size() - 1).first;
        }
        auto& tr = t.targets[it->second];
        if (k != tr.death()) throw IoError("target " + std::to_string(id) + " has a gap in its track");
        tr.states.push_back(x);
    });
    return t;
}

[[nodiscard]] inline std::vector<MeasurementFrame> read_frames_csv(std::istream& is, std::size_t steps) {
    std::vector<MeasurementFrame> frames(steps);
    for (std::size_t k = 0; k < steps; ++k) frames[k].step = k;
    detail::for_each_row(is, kFramesHeader, 4, [&](const std::vector<std::string_view>& f) {
        const long long step = parse_int(f[0]);
        if (step < 1 || static_cast<std::size_t>(step) > steps) throw IoError("frame step out of range");
        auto& fr = frames[static_cast<std::size_t>(step - 1)];
        fr.measurements.emplace_back(parse_double(f[1]), parse_double(f[2]));
        fr.provenance.push_back(static_cast<int>(parse_int(f[3])));
    });
    return frames;
}

inline void save_scenario(const std::string& dir, const ScenarioTruth& t, const std::vector<MeasurementFrame>& frames) {
    std::ofstream a(dir + "/truth.csv"), b(dir + "/frames.csv");
    if (!a || !b) throw IoError("cannot write scenario files in '" + dir + "'");
    write_truth_csv(a, t);
    write_frames_csv(b, frames);
    if (!a || !b) throw IoError("write failed in '" + dir + "'");
}

struct LoadedScenario {
    ScenarioTruth truth;
    std::vector<MeasurementFrame> frames;
};

[[nodiscard]] inline LoadedScenario load_scenario(const std::string& dir) {
    std::ifstream a(dir + "/truth.csv"), b(dir + "/frames.csv");
    if (!a || !b) throw IoError("cannot open truth.csv / frames.csv in '" + dir + "'");
    LoadedScenario s;
    s.truth = read_truth_csv(a);
    s.frames = read_frames_csv(b, s.truth.steps());
    return s;
}

} // namespace scmo
