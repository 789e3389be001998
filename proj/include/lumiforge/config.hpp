#pragma once

// TOML run configuration. Sections: [run], [camera], [gen], [network],
// [train], [sr]. Command-line flags are written into the same table, so the
// snapshot saved next to every output is exactly what the run used.

#include <toml.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lumiforge/error.hpp"
#include "lumiforge/nn/network.hpp"
#include "lumiforge/nn/trainer.hpp"
#include "lumiforge/optics.hpp"
#include "lumiforge/scene.hpp"
#include "lumiforge/sr.hpp"

namespace lumiforge {

inline constexpr const char* kRunConfigName = "run_config.toml";

inline toml::table load_config(const std::filesystem::path& path) {
    try {
        return toml::parse_file(path.string());
    } catch (const toml::parse_error& e) {
        std::ostringstream msg;
        msg << "config " << path.string() << ": " << e.description() << " at line " << e.source().begin.line;
        throw LoadError(msg.str());
    }
}

/// Sets section.key, creating the section when needed.
template <class V>
void set_config(toml::table& t, std::string_view section, std::string_view key, V&& value) {
    if (!t.contains(section)) t.insert(section, toml::table{});
    toml::table* s = t[section].as_table();
    if (!s) throw DomainError("config entry '" + std::string(section) + "' is not a table");
    s->insert_or_assign(key, std::forward<V>(value));
}

namespace detail {

template <class T>
std::optional<T> config_value(const toml::table& t, std::string_view section, std::string_view key) {
    const toml::node* n = t.at_path(std::string(section) + "." + std::string(key)).node();
    if (!n) return std::nullopt;
    if constexpr (std::is_same_v<T, double>) {
        if (auto v = n->value<double>()) return *v;  // accepts integers too
    } else if constexpr (std::is_same_v<T, bool>) {
        if (auto v = n->value<bool>()) return *v;
    } else if constexpr (std::is_same_v<T, std::string>) {
        if (auto v = n->value<std::string>()) return *v;
    } else {
        if (auto v = n->value<std::int64_t>(); v && *v >= 0) return T(*v);
    }
    throw DomainError("config entry " + std::string(section) + "." + std::string(key) + " has the wrong type");
}

template <class T>
void read(const toml::table& t, std::string_view section, std::string_view key, T& out) {
    if (auto v = config_value<T>(t, section, key)) out = *v;
}

}  // namespace detail

struct RunConfig {
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    std::string precision = "float32";
};

inline RunConfig run_from(const toml::table& t) {
    RunConfig r;
    detail::read(t, "run", "seed", r.seed);
    detail::read(t, "run", "threads", r.threads);
    detail::read(t, "run", "precision", r.precision);
    if (r.threads == 0) r.threads = default_thread_count();
    if (r.precision != "float32") throw DomainError("only float32 precision is supported for runs");
    return r;
}

inline optics::CameraConfig camera_from(const toml::table& t) {
    optics::CameraConfig c;
    detail::read(t, "camera", "f_main", c.f_main);
    detail::read(t, "camera", "f_mla", c.f_mla);
    detail::read(t, "camera", "n_micro", c.n_micro);
    detail::read(t, "camera", "n_views", c.n_views);
    detail::read(t, "camera", "micro_pitch", c.micro_pitch);
    detail::read(t, "camera", "aperture", c.aperture);
    c.validate();
    return c;
}

inline GenConfig gen_from(const toml::table& t) {
    GenConfig g;
    detail::read(t, "gen", "views", g.views);
    detail::read(t, "gen", "pixels", g.pixels);
    detail::read(t, "gen", "d_min", g.d_min);
    detail::read(t, "gen", "d_max", g.d_max);
    detail::read(t, "gen", "max_layers", g.max_layers);
    detail::read(t, "gen", "segment_min", g.segment_min);
    detail::read(t, "gen", "segment_max", g.segment_max);
    detail::read(t, "gen", "transparent_fraction", g.transparent_fraction);
    detail::read(t, "gen", "samples_per_pixel", g.samples_per_pixel);
    return g;
}

inline nn::NetworkSpec network_from(const toml::table& t) {
    nn::NetworkSpec s;
    detail::read(t, "network", "levels", s.levels);
    detail::read(t, "network", "pre_layers", s.pre_layers);
    detail::read(t, "network", "pre_kh", s.pre_kh);
    detail::read(t, "network", "pre_kw", s.pre_kw);
    detail::read(t, "network", "pre_channels_per_level", s.pre_channels_per_level);
    detail::read(t, "network", "lstm_hidden", s.lstm_hidden);
    detail::read(t, "network", "lstm_kernel", s.lstm_kernel);
    detail::read(t, "network", "use_lstm", s.use_lstm);
    detail::read(t, "network", "post_kernel", s.post_kernel);
    detail::read(t, "network", "out_kernel", s.out_kernel);
    if (const toml::array* a = t.at_path("network.post_channels").as_array()) {
        s.post_channels.clear();
        for (const auto& e : *a) {
            const auto v = e.value<std::int64_t>();
            if (!v || *v <= 0) throw DomainError("network.post_channels must hold positive integers");
            s.post_channels.push_back(std::size_t(*v));
        }
    }
    s.validate();
    return s;
}

inline nn::TrainConfig train_from(const toml::table& t) {
    nn::TrainConfig c;
    detail::read(t, "train", "steps", c.steps);
    detail::read(t, "train", "batch", c.batch);
    detail::read(t, "train", "lr", c.adam.lr);
    detail::read(t, "train", "beta1", c.adam.beta1);
    detail::read(t, "train", "beta2", c.adam.beta2);
    detail::read(t, "train", "eps", c.adam.eps);
    detail::read(t, "train", "augment", c.augment);
    detail::read(t, "train", "permute_probability", c.augment_policy.permute_probability);
    detail::read(t, "train", "shear_probability", c.augment_policy.shear_probability);
    detail::read(t, "train", "checkpoint_every", c.checkpoint_every);
    return c;
}

inline SRPlan plan_from(const toml::table& t) {
    SRPlan p;
    if (auto s = detail::config_value<std::string>(t, "sr", "plan")) p.order = parse_pass_order(*s);
    detail::read(t, "sr", "tile_size", p.tile_size);
    detail::read(t, "sr", "overlap", p.overlap);
    detail::read(t, "sr", "pin_input_views", p.pin_input_views);
    p.validate();
    return p;
}

/// Writes `<dir>/run_config.toml`.
inline std::filesystem::path write_run_config(const std::filesystem::path& dir, const toml::table& t) {
    std::filesystem::create_directories(dir);
    const auto path = dir / kRunConfigName;
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << t << '\n';
    if (!os) throw IoError("failed writing " + path.string());
    return path;
}

}  // namespace lumiforge
