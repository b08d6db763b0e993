#pragma once

#include "vqpl/ast.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vqpl {

enum class Severity { Error, Warning };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string message;
    Span span;
    std::vector<std::string> expected; // expected-token set for parse errors
};

struct ParseError : std::runtime_error {
    std::vector<Diagnostic> diagnostics;
    explicit ParseError(std::vector<Diagnostic> d)
        : std::runtime_error(d.empty() ? "parse error" : d.front().message),
          diagnostics(std::move(d)) {}
};

struct Decl {
    Ident name;
    std::optional<CTypePtr> annotation;
    CTermPtr term; // may reference earlier declarations by name
    Span span;
};

struct SourceFile {
    std::vector<Decl> decls;

    const Decl* find(const Ident& name) const;
    bool has_main() const { return find("main") != nullptr; }
};

// Parses a whole .vqpl file. Throws ParseError; no partial ASTs.
SourceFile parse_program(const std::string& text);

// The closed term for a declaration with all earlier declarations spliced in.
CTermPtr link_decl(const SourceFile& sf, const Ident& name);

// Parses a classical term in the scope of a file's declarations (spliced).
CTermPtr parse_cterm_text(const SourceFile& sf, const std::string& text);

// Parses a quantum term whose free quantum variables are `qvars`, in the
// scope of a file's declarations (spliced). Used by configuration fixtures.
QTermPtr parse_qterm_text(const SourceFile& sf, const std::vector<Ident>& qvars,
                          const std::string& text);

} // namespace vqpl
