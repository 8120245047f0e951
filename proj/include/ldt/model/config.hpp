#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "json.hpp"

namespace ldt {

struct ModelConfig {
    int vocab_size = 0;
    int model_width = 128;
    int encoder_layers = 2;
    int decoder_layers = 2;
    int attention_heads = 4;
    int feedforward_width = 256;
    int max_input_tokens = 512;
    int max_output_tokens = 128;
    uint64_t init_seed = 0;

    int head_width() const { return model_width / attention_heads; }

    void validate() const {
        if (vocab_size <= 0) throw std::invalid_argument("vocab_size must be positive");
        if (model_width <= 0 || attention_heads <= 0 || feedforward_width <= 0)
            throw std::invalid_argument("model dimensions must be positive");
        if (encoder_layers <= 0 || decoder_layers <= 0)
            throw std::invalid_argument("layer counts must be positive");
        if (model_width % attention_heads != 0)
            throw std::invalid_argument("model_width must be divisible by attention_heads");
        if (max_input_tokens <= 0 || max_output_tokens <= 0)
            throw std::invalid_argument("length caps must be positive");
    }

    bool operator==(const ModelConfig&) const = default;
};

struct TrainConfig {
    double learning_rate = 1e-3;
    std::string lr_schedule = "constant";  // "constant" or "cosine" (decays to ~0 by the last step)
    int batch_size = 8;
    int gradient_accumulation = 1;
    int epochs = 1;
    double lambda = 0.5;
    uint64_t shuffle_seed = 0;
    int checkpoint_every = 200;

    void validate() const {
        if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
        if (lr_schedule != "constant" && lr_schedule != "cosine")
            throw std::invalid_argument("lr_schedule must be constant or cosine");
        if (batch_size <= 0 || gradient_accumulation <= 0)
            throw std::invalid_argument("batch sizes must be positive");
        if (epochs <= 0) throw std::invalid_argument("epochs must be positive");
        if (lambda < 0) throw std::invalid_argument("lambda must be non-negative");
        if (checkpoint_every <= 0) throw std::invalid_argument("checkpoint_every must be positive");
    }
};

inline void to_json(nlohmann::ordered_json& j, const ModelConfig& c) {
    j = {{"vocab_size", c.vocab_size},
         {"model_width", c.model_width},
         {"encoder_layers", c.encoder_layers},
         {"decoder_layers", c.decoder_layers},
         {"attention_heads", c.attention_heads},
         {"feedforward_width", c.feedforward_width},
         {"max_input_tokens", c.max_input_tokens},
         {"max_output_tokens", c.max_output_tokens},
         {"init_seed", c.init_seed}};
}

inline void from_json(const nlohmann::ordered_json& j, ModelConfig& c) {
    c.vocab_size = j.at("vocab_size").get<int>();
    c.model_width = j.value("model_width", 128);
    c.encoder_layers = j.value("encoder_layers", 2);
    c.decoder_layers = j.value("decoder_layers", 2);
    c.attention_heads = j.value("attention_heads", 4);
    c.feedforward_width = j.value("feedforward_width", 256);
    c.max_input_tokens = j.value("max_input_tokens", 512);
    c.max_output_tokens = j.value("max_output_tokens", 128);
    c.init_seed = j.value("init_seed", uint64_t(0));
}

inline void to_json(nlohmann::ordered_json& j, const TrainConfig& c) {
    j = {{"learning_rate", c.learning_rate},
         {"lr_schedule", c.lr_schedule},
         {"batch_size", c.batch_size},
         {"gradient_accumulation", c.gradient_accumulation},
         {"epochs", c.epochs},
         {"lambda", c.lambda},
         {"shuffle_seed", c.shuffle_seed},
         {"checkpoint_every", c.checkpoint_every}};
}

inline void from_json(const nlohmann::ordered_json& j, TrainConfig& c) {
    c.learning_rate = j.value("learning_rate", 1e-3);
    c.lr_schedule = j.value("lr_schedule", std::string("constant"));
    c.batch_size = j.value("batch_size", 8);
    c.gradient_accumulation = j.value("gradient_accumulation", 1);
    c.epochs = j.value("epochs", 1);
    c.lambda = j.value("lambda", 0.5);
    c.shuffle_seed = j.value("shuffle_seed", uint64_t(0));
    c.checkpoint_every = j.value("checkpoint_every", 200);
}

}  // namespace ldt
