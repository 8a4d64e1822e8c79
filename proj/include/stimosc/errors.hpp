#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace stimosc {

// Schema or parse problem in user input. Maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, int line, const std::string& message)
        : std::runtime_error(message), key_(std::move(key)), line_(line) {}
    explicit ConfigError(const std::string& message) : ConfigError("", -1, message) {}

    const std::string& key() const noexcept { return key_; }
    int line() const noexcept { return line_; }

private:
    std::string key_;
    int line_;
};

// Solver / fit / root-search failure. Maps to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Process-wide warning channel. Non-fatal conditions (truncation-unsafe
// displacements, modulation depths outside the validated range, ...) are
// routed here; the CLI collects them into run manifests.
class Warnings {
public:
    using Handler = std::function<void(const std::string&)>;

    static void emit(const std::string& message) {
        auto& self = instance();
        std::lock_guard lock(self.mutex_);
        if (self.handler_) {
            self.handler_(message);
        } else {
            std::cerr << "warning: " << message << '\n';
        }
    }

    // Returns the previous handler so scoped overrides can restore it.
    static Handler set_handler(Handler handler) {
        auto& self = instance();
        std::lock_guard lock(self.mutex_);
        return std::exchange(self.handler_, std::move(handler));
    }

private:
    static Warnings& instance() {
        static Warnings w;
        return w;
    }
    std::mutex mutex_;
    Handler handler_;
};

// Collects warnings for the lifetime of the object.
class WarningCollector {
public:
    WarningCollector()
        : previous_(Warnings::set_handler([this](const std::string& m) { messages_.push_back(m); })) {}
    ~WarningCollector() { Warnings::set_handler(std::move(previous_)); }
    WarningCollector(const WarningCollector&) = delete;
    WarningCollector& operator=(const WarningCollector&) = delete;

    const std::vector<std::string>& messages() const noexcept { return messages_; }

private:
    std::vector<std::string> messages_;
    Warnings::Handler previous_;
};

}  // namespace stimosc
