#pragma once

// nlohmann/json conversions for configuration types. Internal to the library.

#include "catreg/interval_likelihood.hpp"
#include "catreg/model.hpp"

#include <json.hpp>

namespace catreg {

inline void to_json(nlohmann::json& j, const CategoryScheme& s) {
    j = nlohmann::json{{"names", s.names()}, {"edges", s.edges()}};
}

inline void from_json(const nlohmann::json& j, CategoryScheme& s) {
    s = CategoryScheme(j.at("names").get<std::vector<std::string>>(),
                       j.at("edges").get<std::vector<double>>());
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"input_dim", c.input_dim},
                       {"hidden", c.hidden},
                       {"head", std::string(to_string(c.head))},
                       {"mixture", c.mixture},
                       {"components", c.components},
                       {"dropout", c.dropout},
                       {"scheme", c.scheme}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    c = ModelConfig{};
    c.input_dim = j.value("input_dim", c.input_dim);
    c.hidden = j.value("hidden", c.hidden);
    if (j.contains("head")) {
        c.head = parse_head(j.at("head").get<std::string>());
    }
    c.mixture = j.value("mixture", c.mixture);
    c.components = j.value("components", c.components);
    c.dropout = j.value("dropout", c.dropout);
    if (j.contains("scheme")) {
        c.scheme = j.at("scheme").get<CategoryScheme>();
    }
}

}  // namespace catreg
