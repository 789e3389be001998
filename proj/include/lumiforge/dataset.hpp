#pragma once

// On-disk EPI pair sets: pair_NNNNNN_lr.png / pair_NNNNNN_hr.png (16-bit)
// plus pairs.json holding shapes, disparities and validity masks.

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lumiforge/epi.hpp"
#include "lumiforge/error.hpp"
#include "lumiforge/png_io.hpp"
#include "lumiforge/scene.hpp"

namespace lumiforge {

inline constexpr const char* kPairIndexName = "pairs.json";

namespace detail {

inline std::string mask_string(const Epi& e) {
    std::string s(e.mask().size(), '1');
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = e.mask()[i] ? '1' : '0';
    return s;
}

inline void apply_mask_string(Epi& e, const std::string& s) {
    if (s.size() != e.mask().size()) throw LoadError("mask length does not match EPI");
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '0' && s[i] != '1') throw LoadError("mask must be a string of 0 and 1");
        e.mask()[i] = s[i] == '1';
    }
}

inline std::string pair_name(std::size_t i, const char* which) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "pair_%06zu_%s.png", i, which);
    return buf;
}

}  // namespace detail

inline void save_pairs(const std::filesystem::path& dir, const std::vector<TrainingPair>& pairs,
                       const nlohmann::json& meta = nlohmann::json::object()) {
    std::filesystem::create_directories(dir);
    nlohmann::json items = nlohmann::json::array();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& p = pairs[i];
        png::write(dir / detail::pair_name(i, "lr"), p.lr.as_image(), 16);
        png::write(dir / detail::pair_name(i, "hr"), p.hr.as_image(), 16);
        items.push_back({{"lr", detail::pair_name(i, "lr")},
                         {"hr", detail::pair_name(i, "hr")},
                         {"disparities", p.disparities},
                         {"lr_mask", detail::mask_string(p.lr)},
                         {"hr_mask", detail::mask_string(p.hr)}});
    }
    const nlohmann::json index{{"version", 1}, {"count", pairs.size()}, {"meta", meta}, {"pairs", items}};
    std::ofstream os(dir / kPairIndexName);
    if (!os) throw IoError("cannot write " + (dir / kPairIndexName).string());
    os << index.dump(1) << '\n';
}

inline std::vector<TrainingPair> load_pairs(const std::filesystem::path& dir) {
    const auto index_path = dir / kPairIndexName;
    std::ifstream is(index_path);
    if (!is) throw LoadError("cannot open " + index_path.string());
    nlohmann::json index;
    try {
        index = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(index_path.string() + ": " + e.what());
    }
    std::vector<TrainingPair> pairs;
    try {
        for (const auto& item : index.at("pairs")) {
            TrainingPair p;
            p.lr = Epi::from_image(png::read(dir / item.at("lr").get<std::string>()));
            p.hr = Epi::from_image(png::read(dir / item.at("hr").get<std::string>()));
            if (p.hr.views() != 2 * p.lr.views() - 1 || p.hr.pixels() != 2 * p.lr.pixels()) {
                throw LoadError("pair " + item.at("lr").get<std::string>() + ": HR is not (2A-1) x 2S of LR");
            }
            detail::apply_mask_string(p.lr, item.at("lr_mask").get<std::string>());
            detail::apply_mask_string(p.hr, item.at("hr_mask").get<std::string>());
            p.disparities = item.at("disparities").get<std::vector<double>>();
            pairs.push_back(std::move(p));
        }
    } catch (const nlohmann::json::exception& e) {
        throw LoadError(index_path.string() + ": " + e.what());
    }
    if (pairs.empty()) throw LoadError(index_path.string() + " lists no pairs");
    return pairs;
}

}  // namespace lumiforge
