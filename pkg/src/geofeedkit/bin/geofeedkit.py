import os
import datetime
import sys
import json
import logging
import argparse

from .. import __version__, GeofeedkitError
from .. import analytics, config, rpsl
from ..authchain import ownership, pki, signing, simulation
from ..geofeed import decode_file, validate_file, FileReport
from ..iso3166 import default_codes
from ..logger import setup_logger, LoggerConfigError
from ..manifest import RunManifest
from ..prefix import Family, PrefixSet
from ..retrieval import FetchPolicy, crawl_corpus, read_snapshot, write_snapshot

log = logging.getLogger("geofeedkit")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _add_logging_group(parser):
    log_group = parser.add_argument_group(
        "Logging", "These options control the logging behaviour"
    )

    log_group.add_argument(
        "--log-file",
        help="logfile, use 'stdout', 'stderr' to write logs to 'stdout' and 'stderr'",
        default="stderr",
    )

    _level_choices = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

    log_group.add_argument(
        "--log-level", help="the log level", default="INFO", choices=_level_choices
    )

    log_group.add_argument(
        "--log-rotate",
        help="Rotate the log file by size or time, does not apply to 'stdout' nor 'stderr'; "
        "no rotation by default",
        choices=("size", "time"),
        default=None,
    )

    log_group.add_argument(
        "--log-rotate-arg",
        help="The size of the file (with prefix like 1k or 1m) or then '[interval:]when' "
        "parameters of TimedRotatingFileHandler, for example 'midnight' or '3:H', interval=1 is the default",
    )

    log_group.add_argument(
        "-q",
        "--quiet",
        help="run in silent mode, no log outputs are generated",
        action="store_true",
        default=False,
    )


def _add_policy_group(parser):
    group = parser.add_argument_group(
        "Fetching", "Crawl policy, defaults come from the configuration"
    )
    group.add_argument("--timeout", type=float, help="per request timeout in seconds (10)")
    group.add_argument("--retry-limit", type=int, help="retries on timeouts and connection errors (2)")
    group.add_argument("--redirect-limit", type=int, help="redirects followed per request (5)")
    group.add_argument("--max-body", type=int, help="largest accepted body in bytes (64 MiB)")
    group.add_argument("--parallelism", type=int, help="concurrent requests (16)")
    group.add_argument("--host-concurrency", type=int, help="concurrent requests per host (2)")
    group.add_argument("--host-delay", type=float, help="seconds between requests to one host (1)")
    group.add_argument(
        "--allow-insecure",
        action="store_const",
        const=True,
        help="fetch http:// URLs and follow https to http redirects",
    )


def create_cmdline_parse():
    """
    Helper function that creates the command line arguments

    :return: a command line argument
    :rtype: argparse.ArgumentParser
    """
    parser = argparse.ArgumentParser(
        description="Geofeed discovery, validation, analytics and authentication",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        add_help=False,
    )

    _add_logging_group(parser)

    parser.add_argument(
        "--config",
        help=f"a YAML file with default settings, also read from ${config.CONFIG_ENV}",
    )
    parser.add_argument("--help", help="show this help message and exit", action="help")
    parser.add_argument(
        "-v", "--version", action="version", version=f"%(prog)s {__version__}"
    )

    sub = parser.add_subparsers(dest="command", metavar="<COMMAND>")
    sub.required = True

    p = sub.add_parser("discover", help="extract geofeed locators from RPSL dumps")
    p.add_argument("dumps", nargs="+", metavar="<DUMP>", help="RPSL dump files, may be gzipped")
    p.add_argument("--rir", required=True, help="the registry of the dumps")
    p.add_argument("-o", "--output", required=True, help="the locator index (JSON lines)")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("fetch", help="download the geofeeds of a locator index")
    p.add_argument("index", metavar="<INDEX>", help="a locator index")
    p.add_argument("--output-dir", required=True, help="the snapshot directory")
    _add_policy_group(p)
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("validate", help="validate the geofeeds of a snapshot")
    p.add_argument("snapshot", metavar="<SNAPSHOT>", help="a snapshot directory")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--subdivisions", help="a file with one ISO 3166-2 code per line")
    p.add_argument("--strict", action="store_true", help="exit with 1 if any line is malformed")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("report", help="compute adoption and adherence statistics")
    p.add_argument("--index", required=True, help="a locator index")
    p.add_argument("--reports", help="the reports.jsonl written by validate")
    p.add_argument("--totals", required=True, help="YAML with per-RIR record totals")
    p.add_argument("--as-info", help="YAML mapping AS numbers to categories")
    p.add_argument("--as-info-endpoint", help="per-AS info URL template with {asn}")
    p.add_argument("--as-info-token", help="token for the AS info endpoint")
    p.add_argument("--snapshot", help="a snapshot directory, enables the prefix heatmaps")
    p.add_argument("--subdivisions", help="a file with one ISO 3166-2 code per line")
    p.add_argument("--country-min-share", type=float, help="heatmap country threshold (0.05)")
    p.add_argument(
        "--all-v6-lengths",
        dest="v6_multiple_of_4",
        action="store_const",
        const=False,
        help="keep IPv6 lengths that are not multiples of 4",
    )
    p.add_argument("--strict", action="store_true", help="exit with 1 on any adherence violation")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("keygen", help="create a signing key")
    p.add_argument("--subject", required=True)
    p.add_argument("--seed", help="derive the key from a seed, for tests only")
    p.add_argument("-o", "--output", required=True, help="the key file")
    p.add_argument("--public-output", help="also write the public part to this file")
    p.set_defaults(func=cmd_keygen)

    p = sub.add_parser("issue", help="issue a certificate")
    p.add_argument("--issuer-key", required=True)
    p.add_argument("--issuer-cert", help="omit to create a self-signed trust anchor")
    p.add_argument("--subject-key", help="key or public key file of the subject")
    p.add_argument("--subject", help="subject name, defaults to the key's subject")
    p.add_argument("--prefix", action="append", default=[], help="authorized prefix, repeatable")
    p.add_argument("--days", type=int, default=365, help="validity in days")
    p.add_argument("--kind", choices=[k.value for k in pki.IssuerKind], default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_issue)

    p = sub.add_parser("sign", help="sign the scope of a geofeed file")
    p.add_argument("--key", required=True)
    p.add_argument("--cert", required=True)
    p.add_argument("--file", required=True, help="the geofeed file")
    p.add_argument("--scope", action="append", default=[], help="scope prefix, defaults to the certificate's")
    p.add_argument("--url", default="", help="where the file is published")
    p.add_argument("--no-embed", action="store_true", help="don't embed the file in the bundle")
    p.add_argument("-o", "--output", required=True, help="the bundle")
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("countersign", help="append a countersignature to a bundle")
    p.add_argument("--key", required=True)
    p.add_argument("--cert", required=True)
    p.add_argument("--bundle", required=True)
    p.add_argument("--target", required=True, help="an element index or 'file'")
    p.add_argument("--scope", action="append", default=[], help="scope prefix for 'file' targets")
    p.add_argument("--file", help="the geofeed file, when not embedded")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_countersign)

    p = sub.add_parser("verify", help="verify a bundle")
    p.add_argument("--bundle", required=True)
    p.add_argument("--anchor", action="append", required=True, help="trust anchor file, repeatable")
    p.add_argument("--certs", action="append", default=[], help="certificate file or directory, repeatable")
    p.add_argument("--file", help="the geofeed file, when not embedded")
    p.add_argument("--at", help="verification time (ISO 8601), now by default")
    p.add_argument("--strict", action="store_true", help="fail on unknown signer certificates")
    p.add_argument("-o", "--output", help="write the report as JSON")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("ownership", help="compare claimed owners with secondary sources")
    p.add_argument("--claims", required=True, help="JSON lines {prefix, owner}")
    p.add_argument("--rpki", action="append", default=[], help="ROA snapshot (JSON lines)")
    p.add_argument("--owners", action="append", default=[], help="owner fixture (JSON lines)")
    p.add_argument("--live", action="store_true", help="also ask the live prefix endpoint")
    p.add_argument("--ownership-endpoint", help="prefix endpoint URL template with {prefix}")
    p.add_argument("--exact", action="store_true", help="exact-prefix instead of covering lookups")
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_ownership)

    p = sub.add_parser("demo", help="build and verify the demo certificate chain")
    p.add_argument("--seed", default=simulation.DEMO_SEED)
    p.add_argument("--output-dir", help="write keys, certificates, bundle and report here")
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("bench", help="issue, sign and verify many certificates")
    p.add_argument("--certs", type=int, default=1800)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--seed")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-o", "--output", help="write the timing report as JSON")
    p.set_defaults(func=cmd_bench)

    return parser


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        json.dump(obj, fp, indent=2, sort_keys=True)
        fp.write("\n")


def _read_json(path):
    with open(path, encoding="utf-8") as fp:
        try:
            return json.load(fp)
        except json.JSONDecodeError as e:
            raise pki.EnvelopeError(f"{path}: {e}") from None


def _parent(path):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return parent


def _codes(settings):
    codes = default_codes()
    if settings.get("subdivisions"):
        codes = codes.with_subdivisions(settings["subdivisions"])
    return codes


def _read_index(path):
    with open(path, encoding="utf-8") as fp:
        try:
            return rpsl.read_locator_index(fp)
        except (ValueError, KeyError) as e:
            raise GeofeedkitError(f"{path}: invalid locator index: {e}") from None


def cmd_discover(args, settings, manifest):
    try:
        rir = rpsl.Rir.from_name(args.rir)
    except ValueError as e:
        raise config.ConfigError(str(e)) from None

    locators = []
    for path in args.dumps:
        log.info("Reading %r", path)
        with rpsl.open_dump(path) as fp:
            try:
                records = rpsl.parse_rpsl_stream(fp, rir)
            except rpsl.EmptyStream:
                log.warning("%s is empty", path)
                continue
        for record in records:
            locators.extend(rpsl.extract_locators(record))

    _parent(args.output)
    with open(args.output, "w", encoding="utf-8", newline="\n") as fp:
        count = rpsl.write_locator_index(locators, fp)
    log.info("Wrote %d locators to %s", count, args.output)

    manifest.add_output(args.output)
    manifest.write_for(args.output)
    return EXIT_OK


def cmd_fetch(args, settings, manifest):
    policy = FetchPolicy.from_mapping(settings)
    manifest.config = {**manifest.config, "policy": policy.to_dict()}

    locators = _read_index(args.index)
    outcomes, summary = crawl_corpus(locators, policy)

    write_snapshot(args.output_dir, outcomes)
    _write_json(os.path.join(args.output_dir, "availability.json"), summary.to_dict())

    manifest.add_output(args.output_dir)
    manifest.write(args.output_dir)
    print(json.dumps(summary.to_dict(), sort_keys=True))
    return EXIT_OK


def _file_reports(outcomes, codes):
    reports = []
    files = {}
    for url in sorted(outcomes):
        outcome = outcomes[url]
        if not outcome.accessible:
            continue
        geofeed_file = decode_file(outcome.body, url, codes)
        files[url] = geofeed_file
        reports.append(validate_file(geofeed_file))
    return reports, files


def cmd_validate(args, settings, manifest):
    codes = _codes(settings)
    outcomes = read_snapshot(args.snapshot)
    reports, _ = _file_reports(outcomes, codes)

    os.makedirs(args.output_dir, exist_ok=True)
    reports_path = os.path.join(args.output_dir, "reports.jsonl")
    with open(reports_path, "w", encoding="utf-8", newline="\n") as fp:
        for report in reports:
            fp.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")

    summary = analytics.rfc8805_summary(reports)
    _write_json(os.path.join(args.output_dir, "summary.json"), summary.to_dict())

    manifest.add_output(args.output_dir)
    manifest.write(args.output_dir)

    log.info(
        "%d files, %d lines, %d malformed",
        summary.files,
        summary.lines.total,
        summary.lines.malformed,
    )
    if args.strict and summary.lines.malformed:
        return EXIT_FAILURE
    return EXIT_OK


def _read_reports(path):
    with open(path, encoding="utf-8") as fp:
        try:
            return [FileReport.from_dict(json.loads(line)) for line in fp if line.strip()]
        except (ValueError, KeyError) as e:
            raise GeofeedkitError(f"{path}: invalid report: {e}") from None


def _as_provider(args, settings):
    if args.as_info:
        return analytics.FixtureAsInfoProvider.from_file(args.as_info)
    endpoint = settings.get("as_info_endpoint")
    if endpoint:
        return analytics.HttpAsInfoProvider(endpoint, token=settings.get("as_info_token"))
    return None


def _emit(output_dir, name, result):
    _write_json(os.path.join(output_dir, f"{name}.json"), result.to_dict())
    analytics.write_csv(os.path.join(output_dir, f"{name}.csv"), *result.csv_rows())


def cmd_report(args, settings, manifest):
    locators = _read_index(args.index)
    totals = analytics.load_totals(args.totals)
    os.makedirs(args.output_dir, exist_ok=True)

    reports, files = [], {}
    if args.snapshot:
        reports, files = _file_reports(read_snapshot(args.snapshot), _codes(settings))
    if args.reports:
        reports = _read_reports(args.reports)

    adoption = analytics.rir_adoption_stats(locators, totals)
    _emit(args.output_dir, "adoption", adoption)

    provider = _as_provider(args, settings)
    if provider is not None:
        breakdown = analytics.as_category_breakdown(analytics.ases_by_rir(locators), provider)
        _emit(args.output_dir, "categories", breakdown)

    rfc9092, rfc8805 = analytics.rfc_adherence_summaries(locators, reports)
    _emit(args.output_dir, "rfc9092", rfc9092)
    _emit(args.output_dir, "rfc8805", rfc8805)

    if files:
        _heatmaps(args.output_dir, locators, files, settings)

    manifest.add_output(args.output_dir)
    manifest.write(args.output_dir)

    violations = (
        rfc9092.total_records - rfc9092.records[rpsl.LocatorVerdict.VALID]
    ) + rfc8805.lines.malformed
    if args.strict and violations:
        log.warning("%d adherence violations", violations)
        return EXIT_FAILURE
    return EXIT_OK


def _heatmaps(output_dir, locators, files, settings):
    rir_of = {}
    for loc in locators:
        rir_of.setdefault(loc.url, loc.record_ref.rir)

    lines = {rir: [] for rir in rpsl.Rir}
    for url, geofeed_file in files.items():
        if url in rir_of:
            lines[rir_of[url]].extend(geofeed_file.valid_lines())

    share = settings.get("country_min_share", analytics.DEFAULT_COUNTRY_MIN_SHARE)
    v6_filter = settings.get("v6_multiple_of_4", True)
    try:
        share = float(share)
        v6_filter = config.as_bool(v6_filter)
    except ValueError as e:
        raise config.ConfigError(f"invalid heatmap setting {e}") from None

    summary = {}
    all_lines = []
    for rir, rir_lines in lines.items():
        all_lines.extend(rir_lines)
        entry = {}
        for family in Family:
            hist = analytics.prefix_length_histogram(
                rir_lines, family, v6_multiple_of_4=v6_filter, country_min_share=share
            )
            name = f"heatmap_{rir.value}_v{int(family)}"
            analytics.write_csv(os.path.join(output_dir, f"{name}.csv"), *hist.csv_rows())
            entry[f"v{int(family)}"] = {
                "total": hist.total,
                "argmax_length": hist.argmax_length(),
                "argmax_country": hist.argmax_country(),
                "argmax_cell": hist.argmax_cell(),
            }
        counts = analytics.country_prefix_counts(rir_lines)
        entry["argmax_country"] = analytics.argmax(counts)
        summary[rir.value] = entry

    _write_json(os.path.join(output_dir, "heatmaps.json"), summary)
    counts = analytics.country_prefix_counts(all_lines)
    analytics.write_csv(
        os.path.join(output_dir, "countries.csv"),
        ["country", "count"],
        sorted(counts.items()),
    )


def _load_identity(path):
    return pki.Identity.from_dict(_read_json(path))


def _load_certificate(path):
    certs = pki.load_certificates(path)
    if len(certs) != 1:
        raise pki.EnvelopeError(f"{path} must hold exactly one certificate")
    return certs[0]


def cmd_keygen(args, settings, manifest):
    identity = pki.generate_identity(args.subject, args.seed)
    _parent(args.output)
    _write_json(args.output, identity.to_dict())
    os.chmod(args.output, 0o600)
    if args.public_output:
        public = identity.to_dict()
        del public["private_key"]
        _write_json(args.public_output, public)
        manifest.add_output(args.public_output)
    manifest.write_for(args.output)
    log.info("Wrote key of %s to %s", args.subject, args.output)
    return EXIT_OK


def cmd_issue(args, settings, manifest):
    issuer = _load_identity(args.issuer_key)
    prefixes = PrefixSet(args.prefix)
    validity = datetime.timedelta(days=args.days)

    if args.issuer_cert is None:
        kind = pki.IssuerKind(args.kind or pki.IssuerKind.ATTESTATION.value)
        cert = pki.create_trust_anchor(issuer, prefixes, validity=validity, kind=kind)
    else:
        if not args.subject_key:
            raise config.ConfigError("--subject-key is required with --issuer-cert")
        subject = _read_json(args.subject_key)
        try:
            subject_key = pki.b64decode(subject["public_key"])
            subject_name = args.subject or subject["subject"]
        except (KeyError, TypeError) as e:
            raise pki.EnvelopeError(f"{args.subject_key}: {e}") from None
        cert = pki.issue_certificate(
            issuer,
            _load_certificate(args.issuer_cert),
            subject_key,
            subject_name,
            prefixes,
            validity=validity,
            kind=pki.IssuerKind(args.kind or pki.IssuerKind.RESOURCE.value),
        )

    _parent(args.output)
    _write_json(args.output, cert.to_dict())
    manifest.add_output(args.output)
    manifest.write_for(args.output)
    log.info("Issued %s to %s", cert.serial, cert.subject_name)
    return EXIT_OK


def cmd_sign(args, settings, manifest):
    identity = _load_identity(args.key)
    cert = _load_certificate(args.cert)
    with open(args.file, "rb") as fp:
        file_bytes = fp.read()

    scope = PrefixSet(args.scope) if args.scope else cert.authorized_prefixes
    element = signing.sign_scope(identity, cert, file_bytes, scope)
    bundle = signing.SignedGeofeedBundle(file_url=args.url, file_bytes=file_bytes).append(element)

    _parent(args.output)
    bundle.save(args.output, embed=not args.no_embed)
    manifest.add_output(args.output)
    manifest.write_for(args.output)
    return EXIT_OK


def cmd_countersign(args, settings, manifest):
    identity = _load_identity(args.key)
    cert = _load_certificate(args.cert)
    bundle = signing.SignedGeofeedBundle.load(args.bundle)

    file_bytes = None
    if args.file:
        with open(args.file, "rb") as fp:
            file_bytes = fp.read()

    if args.target == "file":
        target = signing.FILE_SCOPE
        scope = PrefixSet(args.scope) if args.scope else cert.authorized_prefixes
    else:
        try:
            target = int(args.target)
        except ValueError:
            raise config.ConfigError(f"invalid target {args.target!r}") from None
        scope = None

    bundle = signing.countersign(
        identity, cert, bundle, target, scope_prefixes=scope, file_bytes=file_bytes
    )
    _parent(args.output)
    bundle.save(args.output, embed=bundle.file_bytes is not None)
    manifest.add_output(args.output)
    manifest.write_for(args.output)
    return EXIT_OK


def _print_report(report):
    for e in report.elements:
        line = f"[{e.index}] {e.status.value:<14} {e.signer_subject or e.signer_serial} ({e.target})"
        if e.passed:
            ladder = report.trusted_by(e.index)
            if ladder:
                line += " trusted by " + ", ".join(ladder)
        else:
            line += ": " + "; ".join(e.errors)
        print(line)


def cmd_verify(args, settings, manifest):
    bundle = signing.SignedGeofeedBundle.load(args.bundle)
    anchors = [c for path in args.anchor for c in pki.load_certificates(path)]
    store = pki.CertificateStore.load(*args.certs)
    for anchor in anchors:
        if anchor.serial not in store:
            store.add(anchor)

    file_bytes = None
    if args.file:
        with open(args.file, "rb") as fp:
            file_bytes = fp.read()

    at_time = pki.parse_time(args.at) if args.at else None
    report = signing.verify_bundle(
        bundle, anchors, store, at_time=at_time, file_bytes=file_bytes, strict=args.strict
    )
    _print_report(report)

    if args.output:
        _parent(args.output)
        _write_json(args.output, report.to_dict())
        manifest.add_output(args.output)
        manifest.write_for(args.output)

    return EXIT_OK if report.all_passed else EXIT_FAILURE


def cmd_ownership(args, settings, manifest):
    claims = ownership.load_claims(args.claims)

    sources = [ownership.RpkiSnapshotSource.from_file(p) for p in args.rpki]
    sources += [ownership.FileOwnershipSource.from_file(p) for p in args.owners]
    if args.live:
        endpoint = settings.get("ownership_endpoint") or ownership.HttpOwnershipSource.DEFAULT_ENDPOINT
        sources.append(ownership.HttpOwnershipSource(endpoint))
    if not sources:
        raise config.ConfigError("no ownership source, use --rpki, --owners or --live")

    source = sources[0] if len(sources) == 1 else ownership.ChainedOwnershipSource(sources)
    verdicts, summary = ownership.compare_ownership(claims, source, exact=args.exact)

    os.makedirs(args.output_dir, exist_ok=True)
    with open(os.path.join(args.output_dir, "verdicts.jsonl"), "w", encoding="utf-8", newline="\n") as fp:
        for v in verdicts:
            fp.write(json.dumps(v.to_dict(), sort_keys=True) + "\n")
    _write_json(os.path.join(args.output_dir, "summary.json"), summary.to_dict())

    manifest.add_output(args.output_dir)
    manifest.write(args.output_dir)
    print(json.dumps(summary.to_dict(), sort_keys=True))
    return EXIT_OK


def cmd_demo(args, settings, manifest):
    demo = simulation.build_demo(seed=args.seed)
    report = demo.verify()
    _print_report(report)

    if args.output_dir:
        out = args.output_dir
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "geofeed.csv"), "wb") as fp:
            fp.write(demo.file_bytes)
        for name, identity in demo.identities.items():
            slug = name.lower().replace(" ", "-").replace("&", "")
            _write_json(os.path.join(out, f"{slug}.key.json"), identity.to_dict())
        demo.store.save(os.path.join(out, "certificates.json"))
        _write_json(os.path.join(out, "anchor.json"), demo.trust_anchors[0].to_dict())
        demo.bundle.save(os.path.join(out, "bundle.json"))
        _write_json(os.path.join(out, "report.json"), report.to_dict())
        manifest.add_output(out)
        manifest.write(out)

    return EXIT_OK if report.all_passed else EXIT_FAILURE


def cmd_bench(args, settings, manifest):
    result = simulation.run_benchmark(args.certs, args.depth, seed=args.seed, workers=args.workers)
    print(json.dumps(result.to_dict(), sort_keys=True))
    if args.output:
        _parent(args.output)
        _write_json(args.output, result.to_dict())
        manifest.add_output(args.output)
        manifest.write_for(args.output)
    return EXIT_OK if result.all_passed else EXIT_FAILURE


def _inputs(args):
    inputs = []
    for name in ("dumps", "index", "snapshot", "reports", "totals", "as_info", "bundle", "file", "claims"):
        value = getattr(args, name, None)
        if isinstance(value, list):
            inputs.extend(value)
        elif value:
            inputs.append(value)
    return inputs


def main(argv=sys.argv[1:]):
    parser = create_cmdline_parse()

    args = parser.parse_args(argv)

    try:
        setup_logger(
            args.log_file,
            args.log_level,
            args.quiet,
            log_rotate=args.log_rotate,
            log_rotate_arg=args.log_rotate_arg,
        )
    except LoggerConfigError as e:
        parser.error(f"Unable to setup the logger: {e.args[0]}")

    try:
        settings = config.resolve(args)
        manifest = RunManifest(command=args.command, inputs=_inputs(args), config=dict(settings))
        return args.func(args, settings, manifest)
    except GeofeedkitError as e:
        log.error("%s", e)
        return e.exit_code
    except OSError as e:
        log.error("%s", e)
        return EXIT_USAGE
    except KeyboardInterrupt:
        # cosmetic reasons, don't display this exception
        return EXIT_FAILURE
