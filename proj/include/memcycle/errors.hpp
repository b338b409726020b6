#pragma once

#include <stdexcept>
#include <string>

namespace memcycle {

// Base for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// --- memory bank ---

class UnknownTarget : public Error {
public:
    explicit UnknownTarget(const std::string& id)
        : Error("unknown target entry id: " + id), id_(id) {}
    const std::string& id() const { return id_; }

private:
    std::string id_;
};

class MalformedAction : public Error {
public:
    using Error::Error;
};

class DimensionMismatch : public Error {
public:
    using Error::Error;
};

class MissingAnchor : public Error {
public:
    using Error::Error;
};

class IoFailure : public Error {
public:
    using Error::Error;
};

// Bad line/element in a persisted file or dataset. Message carries the
// location (line number or JSON path).
class SchemaViolation : public Error {
public:
    using Error::Error;
};

// --- provider gateway ---

class ProviderUnavailable : public Error {
public:
    using Error::Error;
};

class CassetteExhausted : public Error {
public:
    CassetteExhausted(const std::string& role, std::size_t index)
        : Error("cassette exhausted for role '" + role + "' at call index " +
                std::to_string(index)),
          role_(role),
          index_(index) {}
    const std::string& role() const { return role_; }
    std::size_t index() const { return index_; }

private:
    std::string role_;
    std::size_t index_;
};

// Model output errors keep the raw response so callers can log it.
class UnparseableResponse : public Error {
public:
    explicit UnparseableResponse(const std::string& raw)
        : Error("no parseable payload in model response"), raw_(raw) {}
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

class SchemaMismatch : public Error {
public:
    SchemaMismatch(const std::string& missing_key, const std::string& raw)
        : Error("model response missing required field '" + missing_key + "'"),
          missing_key_(missing_key),
          raw_(raw) {}
    const std::string& missing_key() const { return missing_key_; }
    const std::string& raw() const { return raw_; }

private:
    std::string missing_key_;
    std::string raw_;
};

class MissingSlot : public Error {
public:
    explicit MissingSlot(const std::string& name)
        : Error("prompt template placeholder '" + name + "' has no slot value"),
          name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

class UnknownSlot : public Error {
public:
    explicit UnknownSlot(const std::string& name)
        : Error("slot '" + name + "' does not appear in the prompt template"),
          name_(name) {}
    const std::string& name() const { return name_; }

private:
    std::string name_;
};

// --- configuration / CLI ---

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace memcycle
