"""Command-line entry points: prep, train, edit, eval, serve.

Exit codes: 0 success, 1 user error, 2 internal error.
"""

import argparse
import json
import sys
import traceback
from dataclasses import replace
from pathlib import Path

from . import dsp
from .acoustic import (
    AcousticModel,
    DurationModel,
    ModelConfig,
    load_checkpoint,
    optimizer_state_extras,
    restore_optimizer_state,
)
from .corpus import PreparedCorpus, prepare_corpus
from .editing import SpeechEditor
from .errors import SpeechEditError, TrainingDivergedError
from .evaluation import ALL_SYSTEMS, format_report_table, masked_reconstruction
from .frontend import parse_edit_request

DEFAULT_SEED = 1234
DEFAULT_ITERATIONS = 500
DEFAULT_SCALE = 0.125
PAPER_SCALE_ITERATIONS = 100_000


def _load_run_config(args) -> dict:
    cfg = {
        "seed": DEFAULT_SEED,
        "scale_factor": DEFAULT_SCALE,
        "iterations": DEFAULT_ITERATIONS,
        "learning_rate": 1e-3,
        "weight_decay": 1e-6,
        "batch_size": 32,
        "checkpoint_every": 0,
        "vocoder": "griffin_lim",
        "vocoder_command": [],
        "model": {},
    }
    if getattr(args, "config", None):
        cfg.update(json.loads(Path(args.config).read_text()))
    for key in ("seed", "scale_factor", "iterations", "vocoder"):
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "paper_scale", False):
        cfg["scale_factor"] = 1.0
        cfg["iterations"] = PAPER_SCALE_ITERATIONS
        print(
            "note: paper-scale settings (full widths, 100k iterations) are meant "
            "for a GPU box and a real corpus, not a laptop run",
            file=sys.stderr,
        )
    return cfg


def _model_config(cfg: dict) -> ModelConfig:
    overrides = dict(cfg.get("model", {}))
    if "prenet_dims" in overrides:
        overrides["prenet_dims"] = tuple(overrides["prenet_dims"])
    config = ModelConfig(**overrides)
    return replace(config, scale_factor=cfg["scale_factor"])


def _vocoder(cfg: dict):
    if cfg["vocoder"] == "griffin_lim":
        return dsp.GriffinLimVocoder()
    if cfg["vocoder"] == "external":
        return dsp.CommandVocoder(command=list(cfg["vocoder_command"]))
    raise SpeechEditError(f"unknown vocoder {cfg['vocoder']!r}")


def cmd_prep(args) -> int:
    summary = prepare_corpus(args.manifest, args.lexicon, args.alignments, args.out)
    print(f"prepared {summary['utterances']} utterances from {summary['speakers']} speaker(s)")
    print(f"feature cache: {Path(args.out).resolve()}")
    return 0


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    corpus = PreparedCorpus(args.cache)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    acoustic_path = out_dir / "acoustic.ckpt"
    duration_path = out_dir / "duration.ckpt"
    loss_rows: list[str] = []

    def log_acoustic(step, l_fwd, l_bwd):
        loss_rows.append(f"acoustic,{step},{l_fwd:.6f},{l_bwd:.6f},")
        if cfg["checkpoint_every"] and step % cfg["checkpoint_every"] == 0:
            model.save(acoustic_path, extras=optimizer_state_extras(optimizer))

    if args.resume:
        model = AcousticModel.load(args.resume)
        model.learning_rate = cfg["learning_rate"]
        model.weight_decay = cfg["weight_decay"]
        model.batch_size = cfg["batch_size"]
        optimizer = model._optimizer()
        _, _, extras = load_checkpoint(args.resume)
        restore_optimizer_state(optimizer, extras)
        print(f"resuming acoustic training from step {model.step_}")
    else:
        model = AcousticModel(
            config=_model_config(cfg),
            seed=cfg["seed"],
            learning_rate=cfg["learning_rate"],
            weight_decay=cfg["weight_decay"],
            iterations=cfg["iterations"],
            batch_size=cfg["batch_size"],
        )
        model._setup(corpus.phone_inventory, corpus.speakers)
        optimizer = model._optimizer()

    try:
        model.run_training(corpus, optimizer, cfg["iterations"], callback=log_acoustic)
    except TrainingDivergedError:
        (out_dir / "loss_curve.csv").write_text(_loss_csv(loss_rows))
        if acoustic_path.exists():
            print(f"training diverged; last good checkpoint kept at {acoustic_path}", file=sys.stderr)
        raise
    model.save(acoustic_path, extras=optimizer_state_extras(optimizer))

    duration = DurationModel(
        config=model.net_.config,
        seed=cfg["seed"],
        learning_rate=cfg["learning_rate"],
        weight_decay=cfg["weight_decay"],
        iterations=cfg["iterations"],
        batch_size=cfg["batch_size"],
    )
    duration.fit(
        corpus,
        text_encoder=model.net_.text_encoder,
        callback=lambda step, loss: loss_rows.append(f"duration,{step},,,{loss:.6f}"),
    )
    duration.save(duration_path)

    (out_dir / "loss_curve.csv").write_text(_loss_csv(loss_rows))
    l_fwd, l_bwd = model.teacher_forced_loss(corpus)
    l_dur = duration.eval_loss(corpus)
    print(f"acoustic: step {model.step_}, eval L_fwd {l_fwd:.4f}, L_bwd {l_bwd:.4f}")
    print(f"duration: eval loss {l_dur:.4f}")
    print(f"checkpoints: {acoustic_path}, {duration_path}")
    return 0


def _loss_csv(rows: list[str]) -> str:
    return "phase,step,loss_forward,loss_backward,loss_duration\n" + "\n".join(rows) + "\n"


def _load_models(args):
    acoustic = AcousticModel.load(args.acoustic)
    duration = DurationModel.load(args.duration)
    if duration.net_.config.shared_encoder:
        duration.bind_encoder(acoustic)
    return acoustic, duration


def cmd_edit(args) -> int:
    cfg = _load_run_config(args)
    corpus = PreparedCorpus(args.cache)
    acoustic, duration = _load_models(args)
    editor = SpeechEditor(acoustic, duration, corpus.lexicon)

    payload = json.loads(Path(args.request).read_text())
    utterance_id = args.utterance or payload.get("utterance_id")
    if not utterance_id:
        raise SpeechEditError("no utterance id (pass --utterance or put utterance_id in the request)")
    request = parse_edit_request(payload)
    utterance = corpus.get(utterance_id)

    result = editor.edit(utterance, request)
    out_wav = Path(args.out)
    out_wav.parent.mkdir(parents=True, exist_ok=True)
    wave_out = _vocoder(cfg).synthesize(result.edited_mel)
    dsp.save_wav(wave_out, out_wav)
    mel_path = out_wav.with_suffix(".mel")
    dsp.save_mel(result.edited_mel, mel_path)
    report_path = out_wav.with_suffix(".report.json")
    report_path.write_text(json.dumps(result.report(), sort_keys=True, indent=1) + "\n")

    print(f"edited {utterance_id}: {request.operation}")
    if result.t_fusion is not None:
        print(f"fusion frame: {result.t_fusion}")
    split = result.split
    print(f"regions (frames): A={split.len_a} B'={split.len_b_edit} C={split.len_c}")
    print(f"wrote {out_wav}, {mel_path}, {report_path}")
    return 0


def cmd_eval(args) -> int:
    cfg = _load_run_config(args)
    corpus = PreparedCorpus(args.cache)
    acoustic, duration = _load_models(args)
    editor = SpeechEditor(acoustic, duration, corpus.lexicon)
    systems = tuple(s.strip() for s in args.systems.split(",")) if args.systems else ("baseline1", "baseline2", "proposed")
    for system in systems:
        if system not in ALL_SYSTEMS:
            raise SpeechEditError(f"unknown system {system!r}; choose from {ALL_SYSTEMS}")

    vocoder = _vocoder(cfg) if args.waveform_mcd else None
    reports = masked_reconstruction(editor, corpus.ordered(), systems=systems, vocoder=vocoder)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {name: report.as_dict() for name, report in reports.items()}
    (out_dir / "report.json").write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
    table = format_report_table(reports)
    (out_dir / "report.txt").write_text(table)
    print(table, end="")
    print(f"wrote {out_dir / 'report.json'} and {out_dir / 'report.txt'}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    cfg = _load_run_config(args)
    app = create_app(
        cache_dir=args.cache,
        acoustic_path=args.acoustic,
        duration_path=args.duration,
        artifacts_dir=args.artifacts,
        vocoder=_vocoder(cfg),
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="speechedit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prep", help="validate a corpus and build the feature cache")
    p.add_argument("--manifest", required=True)
    p.add_argument("--lexicon", required=True)
    p.add_argument("--alignments", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prep)

    p = sub.add_parser("train", help="train acoustic and duration models")
    p.add_argument("--cache", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale-factor", type=float, dest="scale_factor")
    p.add_argument("--iterations", type=int)
    p.add_argument("--resume", help="acoustic checkpoint to continue from")
    p.add_argument("--paper-scale", action="store_true", dest="paper_scale")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("edit", help="apply one edit request and write audio")
    p.add_argument("--cache", required=True)
    p.add_argument("--acoustic", required=True)
    p.add_argument("--duration", required=True)
    p.add_argument("--utterance")
    p.add_argument("--request", required=True, help="EditRequest JSON file")
    p.add_argument("--out", required=True, help="output WAV path")
    p.add_argument("--config")
    p.add_argument("--vocoder", choices=["griffin_lim", "external"])
    p.set_defaults(func=cmd_edit)

    p = sub.add_parser("eval", help="masked-reconstruction MCD report")
    p.add_argument("--cache", required=True)
    p.add_argument("--acoustic", required=True)
    p.add_argument("--duration", required=True)
    p.add_argument("--systems", help="comma-separated subset of " + ",".join(ALL_SYSTEMS))
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    p.add_argument("--vocoder", choices=["griffin_lim", "external"])
    p.add_argument(
        "--waveform-mcd",
        action="store_true",
        dest="waveform_mcd",
        help="measure MCD on vocoded audio instead of at the mel level",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP editing service")
    p.add_argument("--cache", required=True)
    p.add_argument("--acoustic", required=True)
    p.add_argument("--duration", required=True)
    p.add_argument("--artifacts", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8571)
    p.add_argument("--config")
    p.add_argument("--vocoder", choices=["griffin_lim", "external"])
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TrainingDivergedError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except SpeechEditError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
