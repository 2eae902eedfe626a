from django.core.paginator import Paginator
from django.http import JsonResponse
from django.shortcuts import get_object_or_404

from steinloc.helper.records import RunData
from steinloc.models import ScenarioRun


def runs(request):
    queryset = ScenarioRun.objects.all()
    kind = request.GET.get("kind")
    if kind:
        queryset = queryset.filter(kind=kind)
    paginator = Paginator(object_list=queryset, per_page=request.GET.get("perPage", 50))
    page = paginator.get_page(request.GET.get("page"))
    return JsonResponse(
        {
            "count": paginator.count,
            "page": page.number,
            "pages": paginator.num_pages,
            "runs": [RunData(run).summary() for run in page.object_list],
        }
    )


def run_details(request, runId):
    run = get_object_or_404(ScenarioRun, id=runId)
    data = RunData(run)
    return JsonResponse(
        {
            **data.summary(),
            "stage_means": data.stage_means(),
            "frames": data.frames().to_dict(orient="records"),
        }
    )
