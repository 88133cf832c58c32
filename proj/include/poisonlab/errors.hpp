#pragma once

#include <stdexcept>
#include <string>

namespace poisonlab {

// Error categories map onto CLI exit codes (see tools/poisonlab.cpp).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

class SequencingError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace poisonlab
